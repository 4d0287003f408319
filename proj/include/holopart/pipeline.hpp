#pragma once

// Pipeline stages behind the command-line tool. Every stage is deterministic given the config
// and its seed; output files carry the resolved config in their header.

#include "holopart/config.hpp"
#include "holopart/eval.hpp"
#include "holopart/synthetic.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace holopart::pipeline {

namespace fs = std::filesystem;

/// Progress messages; timestamps and timings live here only, never in output files.
using Log = std::function<void(const std::string&)>;

/// One line of config echo for headers.
std::string config_echo(const PipelineConfig& config);

/// Dataset directory layout: manifest.jsonl (id, split, category) and objects/<id>/ bundles.
struct DatasetItem {
  std::string id;
  std::string split = "train";
  std::string category = "unknown";
};
std::vector<DatasetItem> read_dataset_manifest(const fs::path& dataset);
fs::path object_dir(const fs::path& dataset, const std::string& id);

/// Evaluation part sets: parts.jsonl (object_id, part, category) next to <id>/part_<k>.ply.
struct PartRef {
  std::string object_id;
  int part = 0;
  std::string category;
};
std::vector<PartRef> read_part_set(const fs::path& index);
fs::path part_path(const fs::path& dir, const std::string& object_id, int part);

/// Raw corpus manifest: JSON lines {"id", "parts": [mesh paths relative to the manifest]}.
/// Writes decisions.jsonl to `out`. Throws InputError on an empty manifest.
void cmd_curate(const PipelineConfig& config, const fs::path& manifest, const fs::path& out, const Log& log);

/// Builds whole/part bundles for every passing object of `decisions` into a dataset directory.
/// Returns the number of bundles written.
std::size_t cmd_pairs(const PipelineConfig& config, const fs::path& manifest, const fs::path& decisions,
                      const fs::path& out, const Log& log);

/// Synthetic dataset of `n` assemblies plus the held-out evaluation set: the most occluded part
/// of every test assembly, under eval_gt/.
void cmd_synth(const PipelineConfig& config, int n, std::span<const synthetic::Family> families, const fs::path& out,
               const Log& log);

/// VAE phase, latent normalization, then the part model. With `resume`, continues from the
/// step counts stored in an existing checkpoint. Loss logs go to <checkpoint>.vae.csv and
/// <checkpoint>.flow.csv.
void cmd_train(const PipelineConfig& config, const fs::path& dataset, const fs::path& checkpoint, bool resume,
               const Log& log);

struct CompleteRequest {
  fs::path bundle;           // single object mode
  std::optional<int> part;   // unset: every part of the bundle
  fs::path dataset;          // set mode
  fs::path set;
};

/// Writes <out>/<object_id>/part_<k>.ply for every request and <out>/completions.jsonl with
/// the success flag of each. Returns the number of successful completions.
std::size_t cmd_complete(const PipelineConfig& config, const fs::path& checkpoint, const CompleteRequest& request,
                         const fs::path& out, const Log& log);

/// Scores <pred>/<id>/part_<k>.ply against the parts listed in <gt>/parts.jsonl. Missing
/// predictions count as failures; a missing ground-truth mesh is an input error.
eval::EvalReport cmd_eval(const PipelineConfig& config, const fs::path& pred, const fs::path& gt, const fs::path& out,
                          const Log& log);

inline constexpr double kDefaultSweepScales[] = {1.5, 3.5, 5.0, 7.5};

/// Completion and evaluation of the part set at every guidance scale; writes sweep.csv and one
/// report per scale. Returns the per-scale reports.
std::vector<eval::SweepColumn> cmd_sweep(const PipelineConfig& config, const fs::path& checkpoint,
                                         const fs::path& dataset, const fs::path& set, std::span<const double> scales,
                                         const fs::path& out, const Log& log);

}  // namespace holopart::pipeline
