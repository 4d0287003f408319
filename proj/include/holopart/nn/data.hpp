#pragma once

#include "holopart/curation.hpp"
#include "holopart/nn/model.hpp"

#include <functional>
#include <span>
#include <vector>

namespace holopart::nn {

/// Point and query budgets for building network inputs.
struct SamplingConfig {
  int whole_points = 2048;     // |X|, masked whole-shape points for c_o
  int part_points = 512;       // |S|, visible patch points for c_l
  int shape_points = 2048;     // surface points of a complete shape fed to the VAE encoder
  int uniform_queries = 1024;  // occupancy supervision, uniform in the query box
  int near_queries = 1024;     // occupancy supervision, jittered surface points
  double near_sigma = 0.02;    // jitter std in the encoded frame

  void validate() const;
};

/// A closed shape prepared for the VAE: encoder inputs plus occupancy supervision, all in the
/// frame the shape is encoded in.
struct ShapeExample {
  PointCloud surface;
  std::vector<std::size_t> token_points;  // FPS indices into surface, one per latent token
  std::vector<Vec3> queries;
  std::vector<float> occupancy;  // 1 inside, 0 outside
};

/// Encoder embeddings for a shape with `m_tokens` FPS queries.
struct ShapeEmbedding {
  Matrix<float> query_emb;
  Matrix<float> point_emb;
};

/// `inside` decides occupancy; queries are drawn uniformly in `query_box` and near the surface.
ShapeExample make_shape_example(const TriMesh& surface, const std::function<bool(const Vec3&)>& inside,
                                const AABB& query_box, const SamplingConfig& sampling, int m_tokens,
                                std::uint64_t seed);

/// ShapeExample of a closed mesh in its own frame, occupancy by ray parity.
ShapeExample make_closed_shape_example(const TriMesh& closed, const AABB& query_box, const SamplingConfig& sampling,
                                       int m_tokens, std::uint64_t seed);

ShapeEmbedding embed_shape(const ShapeExample& shape, int n_freqs);

/// Everything the conditioning encoders see for one (whole, mask) prompt.
struct PartPrompt {
  NormTransform to_local;  // whole frame -> patch [-1, 1] frame
  AABB patch_box;          // visible patch bounds, whole frame
  PointCloud whole;        // X, whole frame
  std::vector<double> mask;  // per whole point, 1 on the patch
  PointCloud patch;        // S, whole frame
  std::vector<std::size_t> query_points;  // S0 as FPS indices into patch
};

/// Samples X with its mask and S from the visible patch (faces where face_mask is nonzero).
/// Throws InputError when the mask selects no face.
PartPrompt make_part_prompt(const TriMesh& whole, std::span<const std::uint8_t> face_mask,
                            const SamplingConfig& sampling, int condition_tokens, std::uint64_t seed);

/// Patch-local frame: the patch bounding box's longest axis spans [-1, 1].
NormTransform patch_frame(const AABB& patch_box);

struct PromptEmbedding {
  Matrix<float> context_query;  // pos_emb(S0), whole frame
  Matrix<float> context_keys;   // pos_emb(X ## mask)
  Matrix<float> local_query;    // pos_emb(S0), local frame
  Matrix<float> local_keys;     // pos_emb(S), local frame
};
PromptEmbedding embed_prompt(const PartPrompt& prompt, int n_freqs);

/// A training item for the part model: the prompt and the complete part in the patch frame.
struct PartExample {
  std::string object_id;
  int part = 0;
  PartPrompt prompt;
  ShapeExample complete;  // local frame
};

/// One example per part with a nonempty visible patch. Seeds derive from `seed` and the part.
std::vector<PartExample> make_part_examples(const curation::PartObject& object, const SamplingConfig& sampling,
                                            const ModelConfig& model, std::uint64_t seed);

/// Uniform query box for complete parts in the patch frame.
AABB local_query_box();

/// Stacks per-item matrices vertically (rows of each item stay contiguous).
Matrix<float> stack_rows(std::span<const Matrix<float>> items);

}  // namespace holopart::nn
