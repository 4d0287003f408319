#include "holopart/config.hpp"

#include <fstream>

namespace holopart {

PipelineConfig preset_config(const std::string& name) {
  PipelineConfig c;
  c.preset = name;
  if (name == "desk") return c;
  if (name != "paper") throw InputError("unknown preset: " + name);
  c.model.n_freqs = 8;
  c.model.width = 2048;
  c.model.heads = 16;
  c.model.latent_tokens = 512;
  c.model.latent_channels = 64;
  c.model.vae_decoder_layers = 16;
  c.model.dit_layers = 10;
  c.model.condition_tokens = 512;
  c.model.context_layers = 8;
  c.sampling.whole_points = 20480;
  c.sampling.part_points = 4096;
  c.sampling.shape_points = 8192;
  c.sampling.uniform_queries = 4096;
  c.sampling.near_queries = 4096;
  c.train.batch = 32;
  c.train.vae_lr = 1e-4;
  c.train.flow_lr = 1e-4;
  c.train.vae_steps = 200000;
  c.train.flow_steps = 200000;
  c.inference.mc_resolution = 256;
  c.eval.n_points = 500000;
  return c;
}

nlohmann::json to_json(const PipelineConfig& c) {
  const auto& s = c.sampling;
  const auto& t = c.train;
  const auto& i = c.inference;
  return {{"preset", c.preset},
          {"seed", c.seed},
          {"model", nn::to_json(c.model)},
          {"sampling",
           {{"whole_points", s.whole_points},
            {"part_points", s.part_points},
            {"shape_points", s.shape_points},
            {"uniform_queries", s.uniform_queries},
            {"near_queries", s.near_queries},
            {"near_sigma", s.near_sigma}}},
          {"train",
           {{"vae_steps", t.vae_steps},
            {"flow_steps", t.flow_steps},
            {"batch", t.batch},
            {"vae_lr", t.vae_lr},
            {"flow_lr", t.flow_lr},
            {"weight_decay", t.weight_decay},
            {"clip_norm", t.clip_norm},
            {"p_drop", t.p_drop},
            {"snapshot_every", t.snapshot_every}}},
          {"inference",
           {{"n_steps", i.n_steps},
            {"guidance_scale", i.guidance_scale},
            {"mc_resolution", i.mc_resolution},
            {"box_scale", i.box_scale}}},
          {"eval", {{"n_points", c.eval.n_points}, {"voxel_res", c.eval.voxel_res}}}};
}

namespace {

void merge_strict(nlohmann::json& base, const nlohmann::json& patch, const std::string& where) {
  if (!patch.is_object()) throw InputError("config " + (where.empty() ? "root" : where) + " must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw InputError("unknown config key: " + path);
    if (base[key].is_object()) {
      merge_strict(base[key], value, path);
    } else {
      if (base[key].is_number() != value.is_number() || base[key].is_string() != value.is_string())
        throw InputError("config key " + path + " has the wrong type");
      base[key] = value;
    }
  }
}

template <typename V>
V get(const nlohmann::json& j, const char* key) {
  return j.at(key).get<V>();
}

}  // namespace

PipelineConfig config_from_json(const nlohmann::json& j, const std::string& base_preset) {
  try {
    const std::string name = j.contains("preset") ? j.at("preset").get<std::string>() : base_preset;
    nlohmann::json full = to_json(preset_config(name));
    merge_strict(full, j, "");

    PipelineConfig c;
    c.preset = name;
    c.seed = get<std::uint64_t>(full, "seed");
    c.model = nn::model_config_from_json(full.at("model"));
    const auto& s = full.at("sampling");
    c.sampling.whole_points = get<int>(s, "whole_points");
    c.sampling.part_points = get<int>(s, "part_points");
    c.sampling.shape_points = get<int>(s, "shape_points");
    c.sampling.uniform_queries = get<int>(s, "uniform_queries");
    c.sampling.near_queries = get<int>(s, "near_queries");
    c.sampling.near_sigma = get<double>(s, "near_sigma");
    c.sampling.validate();
    const auto& t = full.at("train");
    c.train.vae_steps = get<long>(t, "vae_steps");
    c.train.flow_steps = get<long>(t, "flow_steps");
    c.train.batch = get<int>(t, "batch");
    c.train.vae_lr = get<double>(t, "vae_lr");
    c.train.flow_lr = get<double>(t, "flow_lr");
    c.train.weight_decay = get<double>(t, "weight_decay");
    c.train.clip_norm = get<double>(t, "clip_norm");
    c.train.p_drop = get<double>(t, "p_drop");
    c.train.snapshot_every = get<int>(t, "snapshot_every");
    if (c.train.vae_steps < 0 || c.train.flow_steps < 0 || c.train.batch < 1 || c.train.snapshot_every < 1)
      throw InputError("train config: steps, batch and snapshot interval out of range");
    if (!(c.train.p_drop >= 0.0 && c.train.p_drop <= 1.0)) throw InputError("train config: p_drop must lie in [0, 1]");
    const auto& i = full.at("inference");
    c.inference.n_steps = get<int>(i, "n_steps");
    c.inference.guidance_scale = get<double>(i, "guidance_scale");
    c.inference.mc_resolution = get<int>(i, "mc_resolution");
    c.inference.box_scale = get<double>(i, "box_scale");
    if (c.inference.n_steps < 1 || c.inference.mc_resolution < 2 || !(c.inference.box_scale >= 1.0))
      throw InputError("inference config out of range");
    const auto& e = full.at("eval");
    c.eval.n_points = get<std::size_t>(e, "n_points");
    c.eval.voxel_res = get<int>(e, "voxel_res");
    if (c.eval.n_points < 1 || c.eval.voxel_res < 1) throw InputError("eval config out of range");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad config: ") + e.what());
  }
}

PipelineConfig load_config(const std::filesystem::path& path, const std::string& base_preset) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, base_preset);
}

}  // namespace holopart
