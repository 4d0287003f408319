#pragma once

#include "holopart/nn/tape.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace holopart::nn {

struct ModelConfig {
  int n_freqs = 8;             // positional embedding octaves
  int width = 128;             // transformer width shared by every block
  int heads = 4;
  int mlp_ratio = 4;
  int latent_tokens = 64;      // M
  int latent_channels = 32;    // channels per latent token
  int vae_decoder_layers = 2;  // self-attention blocks before the occupancy head
  int dit_layers = 4;
  int condition_tokens = 64;   // |S0|, shared by c_o and c_l
  int context_layers = 2;      // self-attention blocks after the context cross-attention
  double kl_weight = 1e-6;

  /// Width of pos_emb without and with the mask channel.
  int embed_width() const { return 6 * n_freqs + 6; }
  int masked_embed_width() const { return embed_width() + 1; }
  void validate() const;
};

/// Per point: sin(2^k pi x_a) for every axis a and octave k, then the matching cosines,
/// then xyz, normal and the optional mask value. Missing normals embed as zero.
template <typename T>
Matrix<T> pos_emb(std::span<const Vec3> positions, std::span<const Vec3> normals,
                  std::span<const double> mask, int n_freqs);

/// Sinusoidal embedding of the integer index floor(1000 t), clamped to [0, 999].
template <typename T>
Matrix<T> time_embedding(std::span<const double> t, int width);
int time_index(double t);

/// All parameters at their training initialization: scaled normal weights, zero biases, unit
/// norm gains, and zeroed timestep modulation and velocity output (identity DiT blocks).
template <typename T>
ParamSet<T> init_params(const ModelConfig& config, std::uint64_t seed);

/// Attention block pieces, exposed for the attention unit tests.
template <typename T>
Var cross_attention(Tape<T>& tape, ParamSet<T>& params, const std::string& name, const ModelConfig& config,
                    Var queries, Var keys_values, int groups);

struct VaeEncoding {
  Var mean;
  Var logvar;
};

/// Point-set encoder: FPS query embeddings (groups*M x P) attend over all point embeddings
/// (groups*N x P). Returns token-wise mean and log-variance (groups*M x C).
template <typename T>
VaeEncoding vae_encode(Tape<T>& tape, ParamSet<T>& params, const ModelConfig& config, const Matrix<T>& query_emb,
                       const Matrix<T>& point_emb, int groups = 1);

/// Self-attention over the latent tokens, then each query embedding cross-attends to the
/// result independently. Returns groups*Q x 1 occupancy logits.
template <typename T>
Var vae_decode(Tape<T>& tape, ParamSet<T>& params, const ModelConfig& config, Var latents,
               const Matrix<T>& query_emb, int groups = 1);

/// The latent stack of vae_decode, reusable across many query batches.
template <typename T>
Var vae_decode_tokens(Tape<T>& tape, ParamSet<T>& params, const ModelConfig& config, Var latents, int groups = 1);
template <typename T>
Var vae_decode_queries(Tape<T>& tape, ParamSet<T>& params, const ModelConfig& config, Var tokens,
                       const Matrix<T>& query_emb, int groups = 1);

/// BCE on occupancy + kl_weight * KL(mean, logvar || N(0, I)).
template <typename T>
Var vae_loss(Tape<T>& tape, Var logits, const Matrix<T>& occupancy, Var mean, Var logvar, T kl_weight);

/// Context tokens: part query embeddings (whole frame) attend over the masked whole-shape
/// embeddings, followed by the self-attention stack.
template <typename T>
Var context_encode(Tape<T>& tape, ParamSet<T>& params, const ModelConfig& config, const Matrix<T>& query_emb,
                   const Matrix<T>& masked_whole_emb, int groups = 1);

/// Local tokens: part query embeddings attend over the part points, both in the local frame.
template <typename T>
Var local_encode(Tape<T>& tape, ParamSet<T>& params, const ModelConfig& config, const Matrix<T>& query_emb,
                 const Matrix<T>& part_emb, int groups = 1);

/// Learned null condition tokens replicated `groups` times.
template <typename T>
Var null_context(Tape<T>& tape, ParamSet<T>& params, int groups = 1);
template <typename T>
Var null_local(Tape<T>& tape, ParamSet<T>& params, int groups = 1);

/// Velocity network v(z_t, t, c_o, c_l): DiT blocks with timestep scale/shift/gate modulation
/// around self-attention and MLP, and two plain cross-attention sublayers (context, then local).
template <typename T>
Var velocity(Tape<T>& tape, ParamSet<T>& params, const ModelConfig& config, Var z_t, std::span<const double> t,
             Var context, Var local, int groups = 1);

/// Mean squared error between v(z_t, t, ...) and the target eps - z0.
template <typename T>
Var flow_loss(Tape<T>& tape, ParamSet<T>& params, const ModelConfig& config, const Matrix<T>& z0,
              std::span<const double> t, const Matrix<T>& eps, Var context, Var local, int groups = 1);

}  // namespace holopart::nn
