#pragma once

#include "holopart/nn/tape.hpp"

#include <functional>

namespace holopart::nn {

using LatentMatrix = Matrix<double>;

struct FlowState {
  double t = 0.0;
  LatentMatrix z_t;
  LatentMatrix eps;
};

/// z_t = (1 - t) z0 + t eps. Throws InputError for t outside [0, 1] or mismatched shapes.
FlowState forward_noise(const LatentMatrix& z0, double t, const LatentMatrix& eps);

/// v_uncond + s (v_cond - v_uncond); s = 1 and s = 0 return the inputs exactly.
LatentMatrix cfg_velocity(const LatentMatrix& v_cond, const LatentMatrix& v_uncond, double scale);

inline constexpr double kDefaultGuidanceScale = 3.5;
inline constexpr int kDefaultSamplingSteps = 50;

/// Velocity prediction at (z, t).
using VelocityField = std::function<LatentMatrix(const LatentMatrix& z, double t)>;

/// Euler integration from t = 1 to t = 0 on a uniform grid: z <- z - dt * v(z, t).
/// Throws NumericError if the state stops being finite.
LatentMatrix integrate_euler(const VelocityField& field, LatentMatrix z1, int n_steps);

/// Standard normal matrix, deterministic given the seed.
LatentMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);

/// Starts from gaussian_matrix(rows, cols, seed) and integrates the field.
LatentMatrix sample_latents(const VelocityField& field, Eigen::Index rows, Eigen::Index cols, int n_steps,
                            std::uint64_t seed);

}  // namespace holopart::nn
