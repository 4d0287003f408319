#pragma once

#include "holopart/field.hpp"
#include "holopart/nn/data.hpp"
#include "holopart/nn/flow.hpp"

namespace holopart::nn {

struct InferenceConfig {
  int n_steps = kDefaultSamplingSteps;
  double guidance_scale = kDefaultGuidanceScale;
  int mc_resolution = 96;  // marching-cubes cells along the longest axis of the extraction box
  double box_scale = field::kDefaultPartBoxScale;
  std::uint64_t seed = 0;
};

/// Occupancy logits of a latent set (un-normalized, M x C) at points of its own frame.
field::OccupancyFn latent_occupancy(const ModelConfig& config, ParamSet<float>& params, const LatentMatrix& latent);

/// Conditional velocity field for one prompt; guidance blends with the null-token prediction.
VelocityField guided_velocity(const ModelConfig& config, ParamSet<float>& params, const PromptEmbedding& prompt,
                              double guidance_scale);

struct Completion {
  TriMesh mesh;             // whole frame
  LatentMatrix latent;      // un-normalized, patch frame
  field::LocalExtraction extraction;  // in the patch frame
};

/// Full inference chain for one mask on a whole shape. Throws InputError for an empty mask and
/// GeometryError when the decoded occupancy has no isosurface inside the extraction box.
Completion complete_part(const ModelConfig& config, ParamSet<float>& params, const SamplingConfig& sampling,
                         const TriMesh& whole, std::span<const std::uint8_t> face_mask, const InferenceConfig& inference);

/// Encodes an isolated closed part in its own [-1, 1] frame with `m_tokens` latent tokens and
/// extracts the decoded surface, returned in the part's original frame.
TriMesh reencode_part_highres(const ModelConfig& config, ParamSet<float>& params, const SamplingConfig& sampling,
                              const TriMesh& part, int m_tokens, int mc_resolution, std::uint64_t seed);

/// VAE round trip of a closed shape in its current frame: encode (deterministic) and extract at
/// `mc_resolution` over `box`.
TriMesh vae_reconstruct(const ModelConfig& config, ParamSet<float>& params, const SamplingConfig& sampling,
                        const TriMesh& closed, const AABB& box, int m_tokens, int mc_resolution, std::uint64_t seed);

}  // namespace holopart::nn
