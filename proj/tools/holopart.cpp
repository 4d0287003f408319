// Command-line front end: curate, pairs, synth, train, complete, eval, sweep.
// Exit status: 0 on success, 1 on bad input, 2 on any other failure.

#include "holopart/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

namespace {

using namespace holopart;
namespace fs = std::filesystem;

struct Common {
  std::string config_path;
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON overrides on top of the preset")->check(CLI::ExistingFile);
  cmd->add_option("--preset", c.preset, "desk or paper");
  cmd->add_option("--seed", c.seed, "master seed");
}

PipelineConfig resolve(const Common& c) {
  PipelineConfig cfg = c.config_path.empty() ? preset_config(c.preset) : load_config(c.config_path, c.preset);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw InputError("not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3D part amodal completion pipeline"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress progress messages");

  const auto start = std::chrono::steady_clock::now();
  const pipeline::Log log = [&](const std::string& msg) {
    if (quiet) return;
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::fprintf(stderr, "[%8.1fs] %s\n", t, msg.c_str());
  };

  Common common;

  std::string manifest, out, decisions, dataset, checkpoint, bundle, set, pred, gt;
  std::string families = "table,chair,lamp,stacked";
  std::string scales = "1.5,3.5,5,7.5";
  int n = 500;
  bool resume = false;
  std::optional<int> part;
  std::optional<long> vae_steps, flow_steps;
  std::optional<double> guidance;
  std::optional<int> n_steps, mc_resolution;

  auto* curate = app.add_subcommand("curate", "apply the curation rules to a raw corpus");
  add_common(curate, common);
  curate->add_option("--manifest", manifest, "JSON lines {id, parts}")->required();
  curate->add_option("--out", out, "output directory")->required();

  auto* pairs = app.add_subcommand("pairs", "build whole/part bundles for curated objects");
  add_common(pairs, common);
  pairs->add_option("--manifest", manifest)->required();
  pairs->add_option("--decisions", decisions, "decisions.jsonl from curate")->required();
  pairs->add_option("--out", out, "dataset directory")->required();

  auto* synth = app.add_subcommand("synth", "generate a synthetic assembly dataset");
  add_common(synth, common);
  synth->add_option("--n", n, "number of assemblies")->check(CLI::PositiveNumber);
  synth->add_option("--families", families, "comma separated family names");
  synth->add_option("--out", out, "dataset directory")->required();

  auto* train = app.add_subcommand("train", "train the shape VAE and the part model");
  add_common(train, common);
  train->add_option("--dataset", dataset)->required();
  train->add_option("--checkpoint", checkpoint)->required();
  train->add_flag("--resume", resume, "continue from an existing checkpoint");
  train->add_option("--vae-steps", vae_steps);
  train->add_option("--flow-steps", flow_steps);

  const auto add_inference = [&](CLI::App* cmd) {
    cmd->add_option("--steps", n_steps, "sampling steps");
    cmd->add_option("--mc-resolution", mc_resolution);
  };

  auto* complete = app.add_subcommand("complete", "complete parts from their visible patches");
  add_common(complete, common);
  complete->add_option("--checkpoint", checkpoint)->required();
  complete->add_option("--bundle", bundle, "single object bundle directory");
  complete->add_option("--part", part, "mask id within the bundle (default: all)");
  complete->add_option("--dataset", dataset);
  complete->add_option("--set", set, "parts.jsonl listing the parts to complete");
  complete->add_option("--guidance", guidance, "guidance scale");
  complete->add_option("--out", out)->required();
  add_inference(complete);

  auto* evaluate = app.add_subcommand("eval", "score completions against ground-truth parts");
  add_common(evaluate, common);
  evaluate->add_option("--pred", pred)->required();
  evaluate->add_option("--gt", gt, "directory with parts.jsonl")->required();
  evaluate->add_option("--out", out)->required();

  auto* sweep = app.add_subcommand("sweep", "complete and score the part set at several guidance scales");
  add_common(sweep, common);
  sweep->add_option("--checkpoint", checkpoint)->required();
  sweep->add_option("--dataset", dataset)->required();
  sweep->add_option("--set", set)->required();
  sweep->add_option("--scales", scales, "comma separated guidance scales");
  sweep->add_option("--out", out)->required();
  add_inference(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    PipelineConfig cfg = resolve(common);
    if (vae_steps) cfg.train.vae_steps = *vae_steps;
    if (flow_steps) cfg.train.flow_steps = *flow_steps;
    if (guidance) cfg.inference.guidance_scale = *guidance;
    if (n_steps) cfg.inference.n_steps = *n_steps;
    if (mc_resolution) cfg.inference.mc_resolution = *mc_resolution;
    if (cfg.train.vae_steps < 0 || cfg.train.flow_steps < 0 || cfg.inference.n_steps < 1 ||
        cfg.inference.mc_resolution < 2)
      throw InputError("step counts and resolution out of range");

    if (*curate) {
      pipeline::cmd_curate(cfg, manifest, out, log);
    } else if (*pairs) {
      pipeline::cmd_pairs(cfg, manifest, decisions, out, log);
    } else if (*synth) {
      std::vector<synthetic::Family> fams;
      std::stringstream ss(families);
      std::string name;
      while (std::getline(ss, name, ',')) fams.push_back(synthetic::family_from_string(name));
      pipeline::cmd_synth(cfg, n, fams, out, log);
    } else if (*train) {
      pipeline::cmd_train(cfg, dataset, checkpoint, resume, log);
    } else if (*complete) {
      if (!bundle.empty() && !set.empty()) throw InputError("give either --bundle or --dataset/--set");
      if (part && bundle.empty()) throw InputError("--part needs --bundle");
      pipeline::CompleteRequest req{bundle, part, dataset, set};
      pipeline::cmd_complete(cfg, checkpoint, req, out, log);
    } else if (*evaluate) {
      const eval::EvalReport r = pipeline::cmd_eval(cfg, pred, gt, out, log);
      std::cout << eval::report_csv(r);
    } else if (*sweep) {
      const std::vector<double> s = parse_list(scales);
      const auto columns = pipeline::cmd_sweep(cfg, checkpoint, dataset, set, s, out, log);
      std::cout << eval::sweep_csv(columns, to_json(cfg));
    }
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return 2;
  }
  return 0;
}
