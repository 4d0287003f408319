#include "holopart/nn/model.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace holopart::nn {

void ModelConfig::validate() const {
  const auto positive = [](int v, const char* what) {
    if (v < 1) throw InputError(std::string("model config: ") + what + " must be positive");
  };
  positive(n_freqs, "n_freqs");
  positive(width, "width");
  positive(heads, "heads");
  positive(mlp_ratio, "mlp_ratio");
  positive(latent_tokens, "latent_tokens");
  positive(latent_channels, "latent_channels");
  positive(dit_layers, "dit_layers");
  positive(condition_tokens, "condition_tokens");
  if (vae_decoder_layers < 0 || context_layers < 0) throw InputError("model config: negative layer count");
  if (width % heads != 0) throw InputError("model config: width must be divisible by heads");
  if (!(kl_weight >= 0.0)) throw InputError("model config: kl_weight must be non-negative");
}

template <typename T>
Matrix<T> pos_emb(std::span<const Vec3> positions, std::span<const Vec3> normals, std::span<const double> mask,
                  int n_freqs) {
  if (n_freqs < 1) throw InputError("pos_emb needs at least one octave");
  if (!normals.empty() && normals.size() != positions.size()) throw InputError("pos_emb normal count mismatch");
  if (!mask.empty() && mask.size() != positions.size()) throw InputError("pos_emb mask count mismatch");
  const int trig = 3 * n_freqs;
  const int cols = 2 * trig + 6 + (mask.empty() ? 0 : 1);
  Matrix<T> out(static_cast<Eigen::Index>(positions.size()), cols);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (int a = 0; a < 3; ++a) {
      for (int k = 0; k < n_freqs; ++k) {
        const double arg = std::ldexp(std::numbers::pi, k) * positions[i][a];
        out(r, a * n_freqs + k) = static_cast<T>(std::sin(arg));
        out(r, trig + a * n_freqs + k) = static_cast<T>(std::cos(arg));
      }
      out(r, 2 * trig + a) = static_cast<T>(positions[i][a]);
      out(r, 2 * trig + 3 + a) = normals.empty() ? T(0) : static_cast<T>(normals[i][a]);
    }
    if (!mask.empty()) out(r, cols - 1) = static_cast<T>(mask[i]);
  }
  return out;
}

int time_index(double t) {
  return std::clamp(static_cast<int>(std::floor(1000.0 * t)), 0, 999);
}

template <typename T>
Matrix<T> time_embedding(std::span<const double> t, int width) {
  const int half = width / 2;
  Matrix<T> out = Matrix<T>::Zero(static_cast<Eigen::Index>(t.size()), width);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double index = time_index(t[i]);
    for (int j = 0; j < half; ++j) {
      const double freq = std::exp(-std::log(10000.0) * j / half);
      out(static_cast<Eigen::Index>(i), j) = static_cast<T>(std::cos(index * freq));
      out(static_cast<Eigen::Index>(i), half + j) = static_cast<T>(std::sin(index * freq));
    }
  }
  return out;
}

namespace {

template <typename T>
class Initializer {
 public:
  Initializer(ParamSet<T>& params, std::uint64_t seed) : params_(params), rng_(seed) {}

  void normal(const std::string& name, int rows, int cols, double stdev) {
    std::normal_distribution<double> dist(0.0, stdev);
    Matrix<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng_));
    params_.add(name, std::move(m));
  }
  void constant(const std::string& name, int rows, int cols, double v) {
    params_.add(name, Matrix<T>::Constant(rows, cols, static_cast<T>(v)));
  }
  void linear(const std::string& name, int in, int out, bool zero = false, double bias = 0.0) {
    if (zero) {
      constant(name + ".weight", in, out, 0.0);
    } else {
      normal(name + ".weight", in, out, 1.0 / std::sqrt(static_cast<double>(in)));
    }
    constant(name + ".bias", 1, out, bias);
  }
  void norm(const std::string& name, int width) {
    constant(name + ".gamma", 1, width, 1.0);
    constant(name + ".beta", 1, width, 0.0);
  }
  void attention(const std::string& name, int width, int kv_width) {
    linear(name + ".q", width, width);
    linear(name + ".k", kv_width, width);
    linear(name + ".v", kv_width, width);
    linear(name + ".o", width, width);
  }
  void mlp(const std::string& name, int width, int ratio) {
    linear(name + ".fc1", width, width * ratio);
    linear(name + ".fc2", width * ratio, width);
  }
  // Pre-norm residual blocks.
  void cross_block(const std::string& name, int width, int ratio) {
    norm(name + ".norm_q", width);
    norm(name + ".norm_kv", width);
    attention(name + ".attn", width, width);
    norm(name + ".norm_mlp", width);
    mlp(name + ".mlp", width, ratio);
  }
  void cross_sublayer(const std::string& name, int width) {
    norm(name + ".norm_q", width);
    norm(name + ".norm_kv", width);
    attention(name + ".attn", width, width);
  }
  void self_block(const std::string& name, int width, int ratio) {
    norm(name + ".norm_attn", width);
    attention(name + ".attn", width, width);
    norm(name + ".norm_mlp", width);
    mlp(name + ".mlp", width, ratio);
  }

 private:
  ParamSet<T>& params_;
  std::mt19937_64 rng_;
};

template <typename T>
Var linear(Tape<T>& tape, ParamSet<T>& params, const std::string& name, Var x) {
  return tape.linear(x, tape.param(params[name + ".weight"]), tape.param(params[name + ".bias"]));
}

template <typename T>
Var norm(Tape<T>& tape, ParamSet<T>& params, const std::string& name, Var x) {
  return tape.layer_norm(x, tape.param(params[name + ".gamma"]), tape.param(params[name + ".beta"]));
}

template <typename T>
Var mlp(Tape<T>& tape, ParamSet<T>& params, const std::string& name, Var x) {
  return linear(tape, params, name + ".fc2", tape.gelu(linear(tape, params, name + ".fc1", x)));
}

template <typename T>
Var attention(Tape<T>& tape, ParamSet<T>& params, const std::string& name, int heads, Var x, Var kv, int groups) {
  const Var q = linear(tape, params, name + ".q", x);
  const Var k = linear(tape, params, name + ".k", kv);
  const Var v = linear(tape, params, name + ".v", kv);
  return linear(tape, params, name + ".o", tape.attention(q, k, v, heads, groups));
}

template <typename T>
Var cross_block(Tape<T>& tape, ParamSet<T>& params, const std::string& name, int heads, Var x, Var kv, int groups) {
  const Var kv_n = norm(tape, params, name + ".norm_kv", kv);
  x = tape.add(x, attention(tape, params, name + ".attn", heads, norm(tape, params, name + ".norm_q", x), kv_n, groups));
  return tape.add(x, mlp(tape, params, name + ".mlp", norm(tape, params, name + ".norm_mlp", x)));
}

template <typename T>
Var cross_sublayer(Tape<T>& tape, ParamSet<T>& params, const std::string& name, int heads, Var x, Var kv, int groups) {
  const Var kv_n = norm(tape, params, name + ".norm_kv", kv);
  return tape.add(x, attention(tape, params, name + ".attn", heads, norm(tape, params, name + ".norm_q", x), kv_n, groups));
}

template <typename T>
Var self_block(Tape<T>& tape, ParamSet<T>& params, const std::string& name, int heads, Var x, int groups) {
  const Var h = norm(tape, params, name + ".norm_attn", x);
  x = tape.add(x, attention(tape, params, name + ".attn", heads, h, h, groups));
  return tape.add(x, mlp(tape, params, name + ".mlp", norm(tape, params, name + ".norm_mlp", x)));
}

std::string indexed(const std::string& prefix, int i) {
  return prefix + "." + std::to_string(i);
}

}  // namespace

template <typename T>
ParamSet<T> init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ParamSet<T> params;
  Initializer<T> init(params, seed);
  const int w = config.width, r = config.mlp_ratio, p = config.embed_width();

  init.linear("vae.enc.q_in", p, w);
  init.linear("vae.enc.kv_in", p, w);
  init.cross_block("vae.enc.cross", w, r);
  init.norm("vae.enc.norm_out", w);
  init.linear("vae.enc.mean", w, config.latent_channels);
  // Starts near-deterministic: per-token noise std exp(-3).
  init.linear("vae.enc.logvar", w, config.latent_channels, false, -6.0);

  init.linear("vae.dec.in", config.latent_channels, w);
  for (int i = 0; i < config.vae_decoder_layers; ++i) init.self_block(indexed("vae.dec.block", i), w, r);
  init.linear("vae.dec.q_in", p, w);
  init.cross_block("vae.dec.cross", w, r);
  init.norm("vae.dec.norm_out", w);
  init.linear("vae.dec.out", w, 1);

  init.linear("ctx.q_in", p, w);
  init.linear("ctx.kv_in", config.masked_embed_width(), w);
  init.cross_block("ctx.cross", w, r);
  for (int i = 0; i < config.context_layers; ++i) init.self_block(indexed("ctx.block", i), w, r);

  init.linear("loc.q_in", p, w);
  init.linear("loc.kv_in", p, w);
  init.cross_block("loc.cross", w, r);

  init.normal("null.context", config.condition_tokens, w, 0.02);
  init.normal("null.local", config.condition_tokens, w, 0.02);

  init.linear("dit.in", config.latent_channels, w);
  init.linear("dit.time1", w, w);
  init.linear("dit.time2", w, w);
  for (int i = 0; i < config.dit_layers; ++i) {
    const std::string b = indexed("dit.block", i);
    init.linear(b + ".modulation", w, 6 * w, true);
    init.attention(b + ".attn", w, w);
    init.cross_sublayer(b + ".context", w);
    init.cross_sublayer(b + ".local", w);
    init.mlp(b + ".mlp", w, r);
  }
  init.linear("dit.final.modulation", w, 2 * w, true);
  init.linear("dit.out", w, config.latent_channels, true);

  // Per-channel latent normalization, fitted after VAE training; never optimized.
  init.constant("latent.mean", 1, config.latent_channels, 0.0);
  init.constant("latent.std", 1, config.latent_channels, 1.0);
  return params;
}

template <typename T>
Var cross_attention(Tape<T>& tape, ParamSet<T>& params, const std::string& name, const ModelConfig& config,
                    Var queries, Var keys_values, int groups) {
  return attention(tape, params, name, config.heads, queries, keys_values, groups);
}

template <typename T>
VaeEncoding vae_encode(Tape<T>& tape, ParamSet<T>& params, const ModelConfig& config, const Matrix<T>& query_emb,
                       const Matrix<T>& point_emb, int groups) {
  if (query_emb.rows() % groups != 0 || point_emb.rows() % groups != 0)
    throw InputError("vae_encode rows not divisible by groups");
  const Var q = linear(tape, params, "vae.enc.q_in", tape.constant(query_emb));
  const Var kv = linear(tape, params, "vae.enc.kv_in", tape.constant(point_emb));
  const Var h = norm(tape, params, "vae.enc.norm_out", cross_block(tape, params, "vae.enc.cross", config.heads, q, kv, groups));
  return {linear(tape, params, "vae.enc.mean", h), linear(tape, params, "vae.enc.logvar", h)};
}

template <typename T>
Var vae_decode_tokens(Tape<T>& tape, ParamSet<T>& params, const ModelConfig& config, Var latents, int groups) {
  Var h = linear(tape, params, "vae.dec.in", latents);
  for (int i = 0; i < config.vae_decoder_layers; ++i)
    h = self_block(tape, params, indexed("vae.dec.block", i), config.heads, h, groups);
  return h;
}

template <typename T>
Var vae_decode_queries(Tape<T>& tape, ParamSet<T>& params, const ModelConfig& config, Var tokens,
                       const Matrix<T>& query_emb, int groups) {
  const Var q = linear(tape, params, "vae.dec.q_in", tape.constant(query_emb));
  const Var o = cross_block(tape, params, "vae.dec.cross", config.heads, q, tokens, groups);
  return linear(tape, params, "vae.dec.out", norm(tape, params, "vae.dec.norm_out", o));
}

template <typename T>
Var vae_decode(Tape<T>& tape, ParamSet<T>& params, const ModelConfig& config, Var latents,
               const Matrix<T>& query_emb, int groups) {
  return vae_decode_queries(tape, params, config, vae_decode_tokens(tape, params, config, latents, groups), query_emb,
                            groups);
}

template <typename T>
Var vae_loss(Tape<T>& tape, Var logits, const Matrix<T>& occupancy, Var mean, Var logvar, T kl_weight) {
  return tape.weighted_sum(tape.bce_with_logits(logits, occupancy), T(1), tape.kl_standard_normal(mean, logvar),
                           kl_weight);
}

template <typename T>
Var context_encode(Tape<T>& tape, ParamSet<T>& params, const ModelConfig& config, const Matrix<T>& query_emb,
                   const Matrix<T>& masked_whole_emb, int groups) {
  if (masked_whole_emb.cols() != config.masked_embed_width())
    throw InputError("context_encode needs the mask channel on the whole-shape points");
  const Var q = linear(tape, params, "ctx.q_in", tape.constant(query_emb));
  const Var kv = linear(tape, params, "ctx.kv_in", tape.constant(masked_whole_emb));
  Var h = cross_block(tape, params, "ctx.cross", config.heads, q, kv, groups);
  for (int i = 0; i < config.context_layers; ++i) h = self_block(tape, params, indexed("ctx.block", i), config.heads, h, groups);
  return h;
}

template <typename T>
Var local_encode(Tape<T>& tape, ParamSet<T>& params, const ModelConfig& config, const Matrix<T>& query_emb,
                 const Matrix<T>& part_emb, int groups) {
  const Var q = linear(tape, params, "loc.q_in", tape.constant(query_emb));
  const Var kv = linear(tape, params, "loc.kv_in", tape.constant(part_emb));
  return cross_block(tape, params, "loc.cross", config.heads, q, kv, groups);
}

template <typename T>
Var null_context(Tape<T>& tape, ParamSet<T>& params, int groups) {
  const Var v = tape.param(params["null.context"]);
  return groups == 1 ? v : tape.tile_rows(v, groups);
}

template <typename T>
Var null_local(Tape<T>& tape, ParamSet<T>& params, int groups) {
  const Var v = tape.param(params["null.local"]);
  return groups == 1 ? v : tape.tile_rows(v, groups);
}

template <typename T>
Var velocity(Tape<T>& tape, ParamSet<T>& params, const ModelConfig& config, Var z_t, std::span<const double> t,
             Var context, Var local, int groups) {
  if (static_cast<int>(t.size()) != groups) throw InputError("velocity needs one time per item");
  const int w = config.width;
  Var temb = linear(tape, params, "dit.time1", tape.constant(time_embedding<T>(t, w)));
  temb = linear(tape, params, "dit.time2", tape.silu(temb));
  const Var cond = tape.silu(temb);

  Var x = linear(tape, params, "dit.in", z_t);
  for (int i = 0; i < config.dit_layers; ++i) {
    const std::string b = indexed("dit.block", i);
    const Var mod = linear(tape, params, b + ".modulation", cond);
    const auto chunk = [&](int c) { return tape.slice_cols(mod, c * w, w); };
    const Var h = tape.modulate(tape.layer_norm(x), chunk(0), chunk(1), groups);
    x = tape.gated_add(x, chunk(2), attention(tape, params, b + ".attn", config.heads, h, h, groups), groups);
    x = cross_sublayer(tape, params, b + ".context", config.heads, x, context, groups);
    x = cross_sublayer(tape, params, b + ".local", config.heads, x, local, groups);
    const Var m = tape.modulate(tape.layer_norm(x), chunk(3), chunk(4), groups);
    x = tape.gated_add(x, chunk(5), mlp(tape, params, b + ".mlp", m), groups);
  }
  const Var fmod = linear(tape, params, "dit.final.modulation", cond);
  const Var out = tape.modulate(tape.layer_norm(x), tape.slice_cols(fmod, 0, w), tape.slice_cols(fmod, w, w), groups);
  return linear(tape, params, "dit.out", out);
}

template <typename T>
Var flow_loss(Tape<T>& tape, ParamSet<T>& params, const ModelConfig& config, const Matrix<T>& z0,
              std::span<const double> t, const Matrix<T>& eps, Var context, Var local, int groups) {
  if (z0.rows() != eps.rows() || z0.cols() != eps.cols()) throw InputError("flow_loss shape mismatch");
  const Eigen::Index m = z0.rows() / groups;
  Matrix<T> z_t(z0.rows(), z0.cols());
  for (int g = 0; g < groups; ++g) {
    const T tt = static_cast<T>(t[static_cast<std::size_t>(g)]);
    z_t.middleRows(g * m, m) = (T(1) - tt) * z0.middleRows(g * m, m) + tt * eps.middleRows(g * m, m);
  }
  const Var v = velocity(tape, params, config, tape.constant(std::move(z_t)), t, context, local, groups);
  return tape.mse(v, eps - z0);
}

#define HOLOPART_INSTANTIATE(T)                                                                                    \
  template Matrix<T> pos_emb<T>(std::span<const Vec3>, std::span<const Vec3>, std::span<const double>, int);      \
  template Matrix<T> time_embedding<T>(std::span<const double>, int);                                             \
  template ParamSet<T> init_params<T>(const ModelConfig&, std::uint64_t);                                         \
  template Var cross_attention<T>(Tape<T>&, ParamSet<T>&, const std::string&, const ModelConfig&, Var, Var, int); \
  template VaeEncoding vae_encode<T>(Tape<T>&, ParamSet<T>&, const ModelConfig&, const Matrix<T>&,               \
                                     const Matrix<T>&, int);                                                      \
  template Var vae_decode<T>(Tape<T>&, ParamSet<T>&, const ModelConfig&, Var, const Matrix<T>&, int);             \
  template Var vae_decode_tokens<T>(Tape<T>&, ParamSet<T>&, const ModelConfig&, Var, int);                        \
  template Var vae_decode_queries<T>(Tape<T>&, ParamSet<T>&, const ModelConfig&, Var, const Matrix<T>&, int);     \
  template Var vae_loss<T>(Tape<T>&, Var, const Matrix<T>&, Var, Var, T);                                         \
  template Var context_encode<T>(Tape<T>&, ParamSet<T>&, const ModelConfig&, const Matrix<T>&, const Matrix<T>&, \
                                 int);                                                                            \
  template Var local_encode<T>(Tape<T>&, ParamSet<T>&, const ModelConfig&, const Matrix<T>&, const Matrix<T>&,   \
                               int);                                                                              \
  template Var null_context<T>(Tape<T>&, ParamSet<T>&, int);                                                      \
  template Var null_local<T>(Tape<T>&, ParamSet<T>&, int);                                                        \
  template Var velocity<T>(Tape<T>&, ParamSet<T>&, const ModelConfig&, Var, std::span<const double>, Var, Var,   \
                           int);                                                                                  \
  template Var flow_loss<T>(Tape<T>&, ParamSet<T>&, const ModelConfig&, const Matrix<T>&,                         \
                            std::span<const double>, const Matrix<T>&, Var, Var, int);

HOLOPART_INSTANTIATE(float)
HOLOPART_INSTANTIATE(double)

}  // namespace holopart::nn
