#include "holopart/nn/flow.hpp"

#include <random>

namespace holopart::nn {

FlowState forward_noise(const LatentMatrix& z0, double t, const LatentMatrix& eps) {
  if (!(t >= 0.0 && t <= 1.0)) throw InputError("flow time must lie in [0, 1]");
  if (z0.rows() != eps.rows() || z0.cols() != eps.cols()) throw InputError("forward_noise shape mismatch");
  // Endpoints are returned verbatim so t = 0 and t = 1 are exact.
  if (t == 0.0) return {t, z0, eps};
  if (t == 1.0) return {t, eps, eps};
  return {t, (1.0 - t) * z0 + t * eps, eps};
}

LatentMatrix cfg_velocity(const LatentMatrix& v_cond, const LatentMatrix& v_uncond, double scale) {
  if (v_cond.rows() != v_uncond.rows() || v_cond.cols() != v_uncond.cols()) throw InputError("cfg shape mismatch");
  if (scale == 1.0) return v_cond;
  if (scale == 0.0) return v_uncond;
  return v_uncond + scale * (v_cond - v_uncond);
}

LatentMatrix integrate_euler(const VelocityField& field, LatentMatrix z, int n_steps) {
  if (n_steps < 1) throw InputError("need at least one sampling step");
  for (int i = 0; i < n_steps; ++i) {
    const double t = 1.0 - static_cast<double>(i) / n_steps;
    const double t_next = 1.0 - static_cast<double>(i + 1) / n_steps;
    const LatentMatrix v = field(z, t);
    if (v.rows() != z.rows() || v.cols() != z.cols()) throw InputError("velocity shape mismatch");
    z -= (t - t_next) * v;
    if (!z.allFinite()) throw NumericError("non-finite latent during sampling at t=" + std::to_string(t));
  }
  return z;
}

LatentMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  LatentMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

LatentMatrix sample_latents(const VelocityField& field, Eigen::Index rows, Eigen::Index cols, int n_steps,
                            std::uint64_t seed) {
  return integrate_euler(field, gaussian_matrix(rows, cols, seed), n_steps);
}

}  // namespace holopart::nn
