#pragma once

#include "holopart/nn/data.hpp"
#include "holopart/nn/flow.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <string>

namespace holopart::nn {

struct OptimizerState {
  long step = 0;
  std::map<std::string, Matrix<float>> first_moment;
  std::map<std::string, Matrix<float>> second_moment;
};

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // decoupled, applied to ".weight" tensors only
  double clip_norm = 1.0;      // global gradient norm clip; 0 disables
};

/// One AdamW update over the parameters selected by `trainable`, using their accumulated
/// gradients. Returns the gradient norm before clipping.
double adamw_step(ParamSet<float>& params, OptimizerState& state, const AdamWConfig& config,
                  const std::function<bool(const std::string&)>& trainable);

bool is_vae_param(const std::string& name);
/// Conditioning encoders, null tokens and the velocity network.
bool is_flow_param(const std::string& name);

/// A model with its configuration echo and optimizer states ("vae", "flow").
struct Checkpoint {
  nlohmann::json config;
  ParamSet<float> params;
  std::map<std::string, OptimizerState> optimizers;
};

/// Binary layout: magic "HPCKPT01", uint32 version, uint64 header length, JSON header (config,
/// tensor table, optimizer steps), then raw little-endian tensor bytes in table order.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct LossRecord {
  long step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double drop_flag_fraction = 0.0;
};

struct TrainOptions {
  long steps = 1000;         // target optimizer step count; resumes continue from the stored count
  int batch = 8;
  AdamWConfig optimizer{};
  double p_drop = 0.1;       // flow only: chance that c_o and c_l are jointly replaced by null tokens
  int snapshot_every = 200;  // steps between in-memory snapshots used to roll back on divergence
  std::uint64_t seed = 0;
  std::function<void(const LossRecord&)> on_loss;
  std::function<void(long step)> on_snapshot;  // after each snapshot, e.g. to write a checkpoint
};

/// VAE training on closed shapes. Throws NumericError on a non-finite loss after restoring the
/// parameters and optimizer state of the last snapshot.
void train_vae(const ModelConfig& config, ParamSet<float>& params, OptimizerState& state,
               std::span<const ShapeExample> shapes, const TrainOptions& options);

/// Deterministic latent (encoder mean) of a shape, un-normalized, M x C.
LatentMatrix encode_mean(const ModelConfig& config, ParamSet<float>& params, const ShapeExample& shape);

/// Sets latent.mean / latent.std from the per-channel statistics of the given latents.
void fit_latent_normalization(ParamSet<float>& params, std::span<const LatentMatrix> latents);
LatentMatrix normalize_latent(const ParamSet<float>& params, const LatentMatrix& z);
LatentMatrix denormalize_latent(const ParamSet<float>& params, const LatentMatrix& z);

/// Part-model training on normalized target latents (one per example). Same divergence rule.
void train_flow(const ModelConfig& config, ParamSet<float>& params, OptimizerState& state,
                std::span<const PartExample> examples, std::span<const LatentMatrix> targets,
                const TrainOptions& options);

}  // namespace holopart::nn
