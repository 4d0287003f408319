#pragma once

#include "holopart/eval.hpp"
#include "holopart/nn/data.hpp"
#include "holopart/nn/inference.hpp"
#include "holopart/nn/train.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace holopart {

struct TrainSchedule {
  long vae_steps = 3000;
  long flow_steps = 12000;
  int batch = 8;
  double vae_lr = 1e-3;
  double flow_lr = 3e-4;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  double p_drop = 0.1;
  int snapshot_every = 500;
};

/// Every knob of the pipeline, fully resolved.
struct PipelineConfig {
  std::string preset = "desk";
  nn::ModelConfig model;
  nn::SamplingConfig sampling;
  TrainSchedule train;
  nn::InferenceConfig inference;  // inference.seed is derived from `seed` per command
  eval::EvalOptions eval;         // eval.seed likewise
  std::uint64_t seed = 0;
};

/// "desk" (single-machine scale) or "paper" (the published sizes, not meant for CI).
PipelineConfig preset_config(const std::string& name);

nlohmann::json to_json(const PipelineConfig& config);

/// Starts from the preset named by `j["preset"]` (or `base_preset`) and overrides the given
/// keys. Unknown keys at any level raise InputError.
PipelineConfig config_from_json(const nlohmann::json& j, const std::string& base_preset = "desk");

PipelineConfig load_config(const std::filesystem::path& path, const std::string& base_preset = "desk");

}  // namespace holopart
