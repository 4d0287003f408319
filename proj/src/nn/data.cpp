#include "holopart/nn/data.hpp"

#include "holopart/sampling.hpp"
#include "holopart/spatial.hpp"

#include <algorithm>
#include <random>

namespace holopart::nn {

void SamplingConfig::validate() const {
  if (whole_points < 1 || part_points < 1 || shape_points < 1) throw InputError("sampling config: point counts must be positive");
  if (uniform_queries < 0 || near_queries < 0 || uniform_queries + near_queries < 1)
    throw InputError("sampling config: need at least one occupancy query");
  if (!(near_sigma > 0.0)) throw InputError("sampling config: near_sigma must be positive");
}

ShapeExample make_shape_example(const TriMesh& surface, const std::function<bool(const Vec3&)>& inside,
                                const AABB& query_box, const SamplingConfig& sampling, int m_tokens,
                                std::uint64_t seed) {
  sampling.validate();
  if (m_tokens > sampling.shape_points) throw InputError("more latent tokens than shape points");
  ShapeExample ex;
  ex.surface = sampling::sample_surface(surface, static_cast<std::size_t>(sampling.shape_points),
                                        derive_seed(seed, "shape-surface"));
  ex.token_points = sampling::fps(ex.surface, static_cast<std::size_t>(m_tokens), 0);

  std::mt19937_64 rng(derive_seed(seed, "shape-queries"));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, sampling.near_sigma);
  const Vec3 ext = query_box.extent();
  for (int i = 0; i < sampling.uniform_queries; ++i) {
    const Vec3 u(uniform(rng), uniform(rng), uniform(rng));
    ex.queries.push_back(query_box.min + u.cwiseProduct(ext));
  }
  const PointCloud near = sampling::sample_surface(surface, static_cast<std::size_t>(std::max(1, sampling.near_queries)),
                                                   derive_seed(seed, "shape-near"));
  for (int i = 0; i < sampling.near_queries; ++i)
    ex.queries.push_back(near.positions[static_cast<std::size_t>(i)] + Vec3(jitter(rng), jitter(rng), jitter(rng)));
  ex.occupancy.reserve(ex.queries.size());
  for (const Vec3& q : ex.queries) ex.occupancy.push_back(inside(q) ? 1.0f : 0.0f);
  return ex;
}

ShapeExample make_closed_shape_example(const TriMesh& closed, const AABB& query_box, const SamplingConfig& sampling,
                                       int m_tokens, std::uint64_t seed) {
  const InsideTester tester(closed);
  return make_shape_example(closed, [&](const Vec3& p) { return tester.inside(p); }, query_box, sampling, m_tokens,
                            seed);
}

ShapeEmbedding embed_shape(const ShapeExample& shape, int n_freqs) {
  const PointCloud tokens = sampling::subset(shape.surface, shape.token_points);
  return {pos_emb<float>(tokens.positions, tokens.normals, {}, n_freqs),
          pos_emb<float>(shape.surface.positions, shape.surface.normals, {}, n_freqs)};
}

NormTransform patch_frame(const AABB& patch_box) {
  return unit_transform(patch_box);
}

PartPrompt make_part_prompt(const TriMesh& whole, std::span<const std::uint8_t> face_mask,
                            const SamplingConfig& sampling, int condition_tokens, std::uint64_t seed) {
  sampling.validate();
  if (face_mask.size() != whole.faces.size()) throw InputError("mask must have one entry per whole face");
  std::vector<std::size_t> patch_faces;
  for (std::size_t f = 0; f < face_mask.size(); ++f)
    if (face_mask[f]) patch_faces.push_back(f);
  if (patch_faces.empty()) throw InputError("empty part mask");
  const TriMesh patch = submesh(whole, patch_faces);

  PartPrompt prompt;
  prompt.patch_box = bounding_box(patch);
  prompt.to_local = patch_frame(prompt.patch_box);
  const auto tracked = sampling::sample_surface_tracked(whole, static_cast<std::size_t>(sampling.whole_points),
                                                        derive_seed(seed, "prompt-whole"));
  prompt.whole = tracked.cloud;
  prompt.mask.reserve(tracked.source_faces.size());
  for (const std::size_t f : tracked.source_faces) prompt.mask.push_back(face_mask[f] ? 1.0 : 0.0);
  prompt.patch = sampling::sample_surface(patch, static_cast<std::size_t>(sampling.part_points),
                                          derive_seed(seed, "prompt-patch"));
  if (condition_tokens > sampling.part_points) throw InputError("more condition tokens than part points");
  prompt.query_points = sampling::fps(prompt.patch, static_cast<std::size_t>(condition_tokens), 0);
  return prompt;
}

PromptEmbedding embed_prompt(const PartPrompt& prompt, int n_freqs) {
  const PointCloud s0 = sampling::subset(prompt.patch, prompt.query_points);
  const PointCloud s0_local = transformed(s0, prompt.to_local);
  const PointCloud s_local = transformed(prompt.patch, prompt.to_local);
  PromptEmbedding e;
  e.context_query = pos_emb<float>(s0.positions, s0.normals, {}, n_freqs);
  e.context_keys = pos_emb<float>(prompt.whole.positions, prompt.whole.normals, prompt.mask, n_freqs);
  e.local_query = pos_emb<float>(s0_local.positions, s0_local.normals, {}, n_freqs);
  e.local_keys = pos_emb<float>(s_local.positions, s_local.normals, {}, n_freqs);
  return e;
}

AABB local_query_box() {
  return {Vec3::Constant(-1.4), Vec3::Constant(1.4)};
}

std::vector<PartExample> make_part_examples(const curation::PartObject& object, const SamplingConfig& sampling,
                                            const ModelConfig& model, std::uint64_t seed) {
  curation::validate(object);
  std::vector<PartExample> out;
  for (std::size_t k = 0; k < object.parts.size(); ++k) {
    std::vector<std::uint8_t> mask(object.surface_masks.size());
    for (std::size_t f = 0; f < mask.size(); ++f) mask[f] = object.surface_masks[f] == static_cast<int>(k);
    if (std::find(mask.begin(), mask.end(), 1) == mask.end()) continue;
    const std::uint64_t part_seed = derive_seed(derive_seed(seed, object.source_id), k);
    PartExample ex;
    ex.object_id = object.source_id;
    ex.part = static_cast<int>(k);
    ex.prompt = make_part_prompt(object.whole, mask, sampling, model.condition_tokens, part_seed);
    const TriMesh local = transformed(object.parts[k], ex.prompt.to_local);
    ex.complete = make_closed_shape_example(local, local_query_box(), sampling, model.latent_tokens,
                                            derive_seed(part_seed, "complete"));
    out.push_back(std::move(ex));
  }
  return out;
}

Matrix<float> stack_rows(std::span<const Matrix<float>> items) {
  if (items.empty()) return {};
  Eigen::Index rows = 0;
  for (const auto& m : items) rows += m.rows();
  Matrix<float> out(rows, items[0].cols());
  Eigen::Index at = 0;
  for (const auto& m : items) {
    if (m.cols() != out.cols()) throw InputError("stack_rows width mismatch");
    out.middleRows(at, m.rows()) = m;
    at += m.rows();
  }
  return out;
}

}  // namespace holopart::nn
