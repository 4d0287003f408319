#include "holopart/nn/inference.hpp"

#include "holopart/nn/train.hpp"
#include "holopart/sampling.hpp"

namespace holopart::nn {

field::OccupancyFn latent_occupancy(const ModelConfig& config, ParamSet<float>& params, const LatentMatrix& latent) {
  Matrix<float> tokens;
  {
    Tape<float> tape(false);
    tokens = tape.value(vae_decode_tokens(tape, params, config, tape.constant(latent.cast<float>()), 1));
  }
  return [&config, &params, tokens = std::move(tokens)](std::span<const Vec3> points) {
    Tape<float> tape(false);
    const Matrix<float> emb = pos_emb<float>(points, {}, {}, config.n_freqs);
    const Matrix<float>& logits = tape.value(vae_decode_queries(tape, params, config, tape.constant(tokens), emb, 1));
    std::vector<double> out(points.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = logits(static_cast<Eigen::Index>(i), 0);
    return out;
  };
}

VelocityField guided_velocity(const ModelConfig& config, ParamSet<float>& params, const PromptEmbedding& prompt,
                              double guidance_scale) {
  Matrix<float> context, local;
  {
    Tape<float> tape(false);
    context = tape.value(context_encode(tape, params, config, prompt.context_query, prompt.context_keys, 1));
    local = tape.value(local_encode(tape, params, config, prompt.local_query, prompt.local_keys, 1));
  }
  return [&config, &params, context = std::move(context), local = std::move(local), guidance_scale](
             const LatentMatrix& z, double t) -> LatentMatrix {
    Tape<float> tape(false);
    const Matrix<float> zf = z.cast<float>();
    if (guidance_scale == 1.0) {
      const double times[] = {t};
      return tape.value(velocity(tape, params, config, tape.constant(zf), times, tape.constant(context),
                                 tape.constant(local), 1))
          .cast<double>();
    }
    // Conditional and unconditional predictions as one batch of two.
    Matrix<float> z2(2 * zf.rows(), zf.cols());
    z2 << zf, zf;
    const Var co = tape.concat_rows(tape.constant(context), null_context(tape, params));
    const Var cl = tape.concat_rows(tape.constant(local), null_local(tape, params));
    const double times[] = {t, t};
    const Matrix<double> v = tape.value(velocity(tape, params, config, tape.constant(std::move(z2)), times, co, cl, 2))
                                 .cast<double>();
    return cfg_velocity(v.topRows(zf.rows()), v.bottomRows(zf.rows()), guidance_scale);
  };
}

Completion complete_part(const ModelConfig& config, ParamSet<float>& params, const SamplingConfig& sampling,
                         const TriMesh& whole, std::span<const std::uint8_t> face_mask, const InferenceConfig& inference) {
  const PartPrompt prompt =
      make_part_prompt(whole, face_mask, sampling, config.condition_tokens, derive_seed(inference.seed, "prompt"));
  const PromptEmbedding emb = embed_prompt(prompt, config.n_freqs);
  const VelocityField field = guided_velocity(config, params, emb, inference.guidance_scale);

  Completion out;
  const LatentMatrix z = sample_latents(field, config.latent_tokens, config.latent_channels, inference.n_steps,
                                        derive_seed(inference.seed, "latent-noise"));
  out.latent = denormalize_latent(params, z);
  const AABB local_box{prompt.to_local.apply(prompt.patch_box.min), prompt.to_local.apply(prompt.patch_box.max)};
  out.extraction = field::local_marching_cubes(latent_occupancy(config, params, out.latent), local_box,
                                               inference.box_scale, inference.mc_resolution);
  if (out.extraction.mesh.empty()) throw GeometryError("no isosurface inside the extraction box");
  out.mesh = transformed(out.extraction.mesh, prompt.to_local.inverse());
  return out;
}

namespace {

LatentMatrix encode_surface(const ModelConfig& config, ParamSet<float>& params, const SamplingConfig& sampling,
                            const TriMesh& mesh, int m_tokens, std::uint64_t seed) {
  if (m_tokens < 1 || m_tokens > sampling.shape_points) throw InputError("token count out of range");
  ShapeExample shape;
  shape.surface = sampling::sample_surface(mesh, static_cast<std::size_t>(sampling.shape_points),
                                           derive_seed(seed, "shape-surface"));
  shape.token_points = sampling::fps(shape.surface, static_cast<std::size_t>(m_tokens), 0);
  return encode_mean(config, params, shape);
}

}  // namespace

TriMesh vae_reconstruct(const ModelConfig& config, ParamSet<float>& params, const SamplingConfig& sampling,
                        const TriMesh& closed, const AABB& box, int m_tokens, int mc_resolution, std::uint64_t seed) {
  const LatentMatrix z = encode_surface(config, params, sampling, closed, m_tokens, seed);
  return field::local_marching_cubes(latent_occupancy(config, params, z), box, 1.0, mc_resolution).mesh;
}

TriMesh reencode_part_highres(const ModelConfig& config, ParamSet<float>& params, const SamplingConfig& sampling,
                              const TriMesh& part, int m_tokens, int mc_resolution, std::uint64_t seed) {
  const NormalizedMesh unit = normalize_to_unit(part);
  const AABB box = bounding_box(unit.mesh).scaled(1.1);
  const TriMesh mesh = vae_reconstruct(config, params, sampling, unit.mesh, box, m_tokens, mc_resolution, seed);
  return transformed(mesh, unit.transform.inverse());
}

}  // namespace holopart::nn
