#include "holopart/pipeline.hpp"

#include "holopart/curation.hpp"
#include "holopart/mesh_io.hpp"
#include "holopart/nn/data.hpp"
#include "holopart/nn/inference.hpp"
#include "holopart/nn/train.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace holopart::pipeline {

namespace {

using nlohmann::json;

std::vector<json> read_json_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      if (j.contains("config")) continue;  // header
      out.push_back(std::move(j));
    } catch (const json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

class LineWriter {
 public:
  LineWriter(const fs::path& path, const PipelineConfig& config, bool append = false) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    const bool fresh = !append || !fs::exists(path);
    out_.open(path, std::ios::binary | (fresh ? std::ios::trunc : std::ios::app));
    if (!out_) throw InputError("cannot write " + path.string());
    if (fresh) out_ << json{{"config", to_json(config)}}.dump() << '\n';
  }
  void write(const json& j) { out_ << j.dump() << '\n'; }

 private:
  std::ofstream out_;
};

void write_text(const fs::path& path, const std::string& text) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

std::vector<std::string> echo_comments(const PipelineConfig& config) { return {config_echo(config)}; }

int thread_count() {
  if (const char* env = std::getenv("HOLOPART_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

/// Runs fn(i) for i in [0, n) on HOLOPART_THREADS workers; results must be written by index.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(thread_count());
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<std::uint8_t> part_mask(const curation::PartObject& object, int part) {
  std::vector<std::uint8_t> mask(object.surface_masks.size());
  for (std::size_t f = 0; f < mask.size(); ++f) mask[f] = object.surface_masks[f] == part;
  return mask;
}

struct LoadedModel {
  nn::Checkpoint checkpoint;
  nn::ModelConfig model;
};

LoadedModel load_model(const fs::path& path) {
  LoadedModel m;
  m.checkpoint = nn::load_checkpoint(path);
  try {
    m.model = nn::model_config_from_json(m.checkpoint.config.at("pipeline").at("model"));
  } catch (const json::exception& e) {
    throw InputError("checkpoint " + path.string() + " lacks a model config: " + e.what());
  }
  const auto flow = m.checkpoint.optimizers.find("flow");
  if (flow == m.checkpoint.optimizers.end() || flow->second.step == 0)
    throw InputError("checkpoint " + path.string() + " has no trained part model");
  return m;
}

nn::InferenceConfig inference_for(const PipelineConfig& config, const std::string& object_id, int part,
                                  double guidance_scale) {
  nn::InferenceConfig inf = config.inference;
  inf.guidance_scale = guidance_scale;
  inf.seed = derive_seed(derive_seed(config.seed, "complete"), object_id + "#" + std::to_string(part));
  return inf;
}

eval::EvalOptions eval_options(const PipelineConfig& config) {
  eval::EvalOptions e = config.eval;
  e.seed = derive_seed(config.seed, "eval");
  return e;
}

json eval_echo(const PipelineConfig& config, double guidance_scale) {
  return {{"n_points", config.eval.n_points},
          {"voxel_res", config.eval.voxel_res},
          {"guidance_scale", guidance_scale},
          {"pipeline", to_json(config)}};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.8g", v);
  return buf;
}

}  // namespace

std::string config_echo(const PipelineConfig& config) { return "holopart config " + to_json(config).dump(); }

std::vector<DatasetItem> read_dataset_manifest(const fs::path& dataset) {
  std::vector<DatasetItem> items;
  for (const json& j : read_json_lines(dataset / "manifest.jsonl")) {
    try {
      DatasetItem item;
      item.id = j.at("id").get<std::string>();
      item.split = j.value("split", "train");
      item.category = j.contains("category") ? j.at("category").get<std::string>() : j.value("family", "unknown");
      items.push_back(std::move(item));
    } catch (const json::exception& e) {
      throw InputError("bad manifest entry in " + dataset.string() + ": " + e.what());
    }
  }
  return items;
}

fs::path object_dir(const fs::path& dataset, const std::string& id) { return dataset / "objects" / id; }

std::vector<PartRef> read_part_set(const fs::path& index) {
  std::vector<PartRef> refs;
  for (const json& j : read_json_lines(index)) {
    try {
      refs.push_back({j.at("object_id").get<std::string>(), j.at("part").get<int>(), j.value("category", "unknown")});
    } catch (const json::exception& e) {
      throw InputError("bad part set entry in " + index.string() + ": " + e.what());
    }
  }
  return refs;
}

fs::path part_path(const fs::path& dir, const std::string& object_id, int part) {
  return dir / object_id / ("part_" + std::to_string(part) + ".ply");
}

// --- curation ------------------------------------------------------------------------------

void cmd_curate(const PipelineConfig& config, const fs::path& manifest, const fs::path& out, const Log& log) {
  const std::vector<json> lines = read_json_lines(manifest);
  if (lines.empty()) throw InputError("manifest " + manifest.string() + " lists no objects");
  std::vector<curation::RawObject> corpus;
  for (const json& j : lines) {
    curation::RawObject obj;
    try {
      obj.id = j.at("id").get<std::string>();
      for (const auto& p : j.at("parts")) obj.parts.push_back(load_mesh(manifest.parent_path() / p.get<std::string>()).mesh);
    } catch (const json::exception& e) {
      throw InputError("bad manifest entry in " + manifest.string() + ": " + e.what());
    }
    corpus.push_back(std::move(obj));
  }
  log("curating " + std::to_string(corpus.size()) + " objects");
  const auto decisions = curation::curate(corpus);
  LineWriter writer(out / "decisions.jsonl", config);
  std::size_t passed = 0;
  for (const auto& d : decisions) {
    json diag = json::object();
    for (const auto& [k, v] : d.diagnostics) diag[k] = v;
    writer.write({{"id", d.id},
                  {"pass", d.pass},
                  {"failed_rule", curation::to_string(d.failed_rule)},
                  {"diagnostics", diag},
                  {"warnings", d.warnings}});
    passed += d.pass;
  }
  log(std::to_string(passed) + " of " + std::to_string(decisions.size()) + " objects pass");
}

std::size_t cmd_pairs(const PipelineConfig& config, const fs::path& manifest, const fs::path& decisions,
                      const fs::path& out, const Log& log) {
  std::map<std::string, json> entries;
  try {
    for (json& j : read_json_lines(manifest)) {
      const std::string id = j.at("id").get<std::string>();
      entries[id] = std::move(j);
    }
  } catch (const json::exception& e) {
    throw InputError("bad manifest entry in " + manifest.string() + ": " + e.what());
  }
  std::vector<std::string> pass;
  try {
    for (const json& d : read_json_lines(decisions))
      if (d.at("pass").get<bool>()) pass.push_back(d.at("id").get<std::string>());
  } catch (const json::exception& e) {
    throw InputError("bad decision entry in " + decisions.string() + ": " + e.what());
  }
  fs::create_directories(out);
  LineWriter writer(out / "manifest.jsonl", config);
  std::size_t written = 0;
  for (const std::string& id : pass) {
    const auto it = entries.find(id);
    if (it == entries.end()) throw InputError("decision for " + id + " has no manifest entry");
    std::vector<TriMesh> parts;
    for (const auto& p : it->second.at("parts")) parts.push_back(load_mesh(manifest.parent_path() / p.get<std::string>()).mesh);
    try {
      const curation::PartObject obj = curation::make_whole_part_pairs(id, parts);
      curation::save_part_object(obj, object_dir(out, id), echo_comments(config));
    } catch (const GeometryError& e) {
      log("skipping " + id + ": " + e.what());
      continue;
    }
    writer.write({{"id", id}, {"split", "train"}, {"category", it->second.value("category", "unknown")}});
    ++written;
  }
  log(std::to_string(written) + " bundles written");
  return written;
}

// --- synthetic data ---------------------------------------------------------------------------

void cmd_synth(const PipelineConfig& config, int n, std::span<const synthetic::Family> families, const fs::path& out,
               const Log& log) {
  const auto entries = synthetic::gen_dataset(n, families, derive_seed(config.seed, "synth"));
  fs::create_directories(out);
  synthetic::write_manifest(entries, out / "manifest.jsonl", to_json(config));
  LineWriter meta(out / "assemblies.jsonl", config);
  LineWriter eval_set(out / "eval_gt" / "parts.jsonl", config);
  const auto comments = echo_comments(config);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    synthetic::Assembly a = synthetic::gen_assembly({e.family, e.seed, e.occlusion});
    a.object.source_id = e.id;
    curation::save_part_object(a.object, object_dir(out, e.id), comments);
    meta.write({{"id", e.id},
                {"family", synthetic::to_string(e.family)},
                {"occlusion_target", a.occlusion_target},
                {"occlusion_measured", a.occlusion_measured},
                {"focus_part", a.focus_part},
                {"part_hidden", a.part_hidden}});
    if (e.split == "test") {
      fs::create_directories(part_path(out / "eval_gt", e.id, 0).parent_path());
      save_mesh(a.object.parts[static_cast<std::size_t>(a.focus_part)], part_path(out / "eval_gt", e.id, a.focus_part),
                comments);
      eval_set.write({{"object_id", e.id}, {"part", a.focus_part}, {"category", synthetic::to_string(e.family)}});
    }
    if ((i + 1) % 50 == 0 || i + 1 == entries.size())
      log("generated " + std::to_string(i + 1) + " / " + std::to_string(entries.size()));
  }
}

// --- training ---------------------------------------------------------------------------------

void cmd_train(const PipelineConfig& config, const fs::path& dataset, const fs::path& checkpoint, bool resume,
               const Log& log) {
  std::vector<nn::PartExample> examples;
  for (const DatasetItem& item : read_dataset_manifest(dataset)) {
    if (item.split != "train") continue;
    const curation::PartObject obj = curation::load_part_object(object_dir(dataset, item.id));
    for (auto& ex : nn::make_part_examples(obj, config.sampling, config.model, derive_seed(config.seed, "examples")))
      examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw InputError("dataset " + dataset.string() + " has no training parts");
  log("training on " + std::to_string(examples.size()) + " parts");

  nn::Checkpoint ck;
  const bool resuming = resume && fs::exists(checkpoint);
  if (resuming) {
    ck = nn::load_checkpoint(checkpoint);
    if (!ck.config.contains("pipeline") || ck.config["pipeline"].value("model", json()) != nn::to_json(config.model))
      throw InputError("checkpoint model config differs from the requested one");
    log("resuming at vae step " + std::to_string(ck.optimizers["vae"].step) + ", flow step " +
        std::to_string(ck.optimizers["flow"].step));
  } else {
    ck.params = nn::init_params<float>(config.model, derive_seed(config.seed, "init"));
  }
  const bool was_normalized = resuming && ck.config.value("latent_normalized", false);
  ck.config["pipeline"] = to_json(config);
  ck.config["latent_normalized"] = was_normalized;
  nn::OptimizerState& vae_state = ck.optimizers["vae"];
  nn::OptimizerState& flow_state = ck.optimizers["flow"];

  const auto loss_log = [&](const fs::path& path) {
    const bool fresh = !resuming || !fs::exists(path);
    auto out = std::make_shared<std::ofstream>(path, std::ios::binary | (fresh ? std::ios::trunc : std::ios::app));
    if (!*out) throw InputError("cannot write " + path.string());
    if (fresh) *out << "# " << config_echo(config) << "\nstep,loss,lr,drop_flag_fraction\n";
    return out;
  };
  const auto base_options = [&](const std::shared_ptr<std::ofstream>& csv, const char* phase, long steps) {
    nn::TrainOptions o;
    o.steps = steps;
    o.batch = config.train.batch;
    o.optimizer.weight_decay = config.train.weight_decay;
    o.optimizer.clip_norm = config.train.clip_norm;
    o.snapshot_every = config.train.snapshot_every;
    o.seed = derive_seed(config.seed, "train");
    o.on_loss = [csv, phase, &log](const nn::LossRecord& r) {
      *csv << r.step << ',' << fmt(r.loss) << ',' << fmt(r.lr) << ',' << fmt(r.drop_flag_fraction) << '\n';
      if (r.step % 100 == 0) log(std::string(phase) + " step " + std::to_string(r.step) + " loss " + fmt(r.loss));
    };
    o.on_snapshot = [&](long) {
      csv->flush();
      nn::save_checkpoint(ck, checkpoint);
    };
    return o;
  };

  // VAE on the complete parts, in the frame each part is generated in.
  std::vector<nn::ShapeExample> shapes;
  shapes.reserve(examples.size());
  for (const auto& ex : examples) shapes.push_back(ex.complete);
  {
    const auto csv = loss_log(fs::path(checkpoint.string() + ".vae.csv"));
    nn::TrainOptions o = base_options(csv, "vae", config.train.vae_steps);
    o.optimizer.lr = config.train.vae_lr;
    if (flow_state.step > 0 && vae_state.step < o.steps)
      throw InputError("cannot extend the VAE phase after the part model has started training");
    nn::train_vae(config.model, ck.params, vae_state, shapes, o);
  }

  std::vector<nn::LatentMatrix> latents;
  latents.reserve(shapes.size());
  for (const auto& s : shapes) latents.push_back(nn::encode_mean(config.model, ck.params, s));
  if (flow_state.step == 0) {
    nn::fit_latent_normalization(ck.params, latents);
    ck.config["latent_normalized"] = true;
  }
  for (auto& z : latents) z = nn::normalize_latent(ck.params, z);
  nn::save_checkpoint(ck, checkpoint);
  log("latents encoded");

  {
    const auto csv = loss_log(fs::path(checkpoint.string() + ".flow.csv"));
    nn::TrainOptions o = base_options(csv, "flow", config.train.flow_steps);
    o.optimizer.lr = config.train.flow_lr;
    o.p_drop = config.train.p_drop;
    nn::train_flow(config.model, ck.params, flow_state, examples, latents, o);
  }
  nn::save_checkpoint(ck, checkpoint);
  log("checkpoint written to " + checkpoint.string());
}

// --- inference and evaluation ---------------------------------------------------------------------

namespace {

struct Target {
  std::string object_id;
  int part = 0;
  std::shared_ptr<const curation::PartObject> object;
};

std::vector<Target> resolve_targets(const CompleteRequest& request) {
  std::vector<Target> targets;
  if (!request.bundle.empty()) {
    auto obj = std::make_shared<const curation::PartObject>(curation::load_part_object(request.bundle));
    const int n = static_cast<int>(obj->parts.size());
    if (request.part) {
      if (*request.part < 0 || *request.part >= n)
        throw InputError("mask id " + std::to_string(*request.part) + " out of range for " + obj->source_id);
      targets.push_back({obj->source_id, *request.part, obj});
    } else {
      for (int k = 0; k < n; ++k) targets.push_back({obj->source_id, k, obj});
    }
    return targets;
  }
  if (request.dataset.empty() || request.set.empty()) throw InputError("complete needs a bundle or a dataset and part set");
  std::map<std::string, std::shared_ptr<const curation::PartObject>> cache;
  for (const PartRef& ref : read_part_set(request.set)) {
    auto& obj = cache[ref.object_id];
    if (!obj)
      obj = std::make_shared<const curation::PartObject>(curation::load_part_object(object_dir(request.dataset, ref.object_id)));
    if (ref.part < 0 || ref.part >= static_cast<int>(obj->parts.size()))
      throw InputError("mask id " + std::to_string(ref.part) + " out of range for " + ref.object_id);
    targets.push_back({ref.object_id, ref.part, obj});
  }
  return targets;
}

struct Attempt {
  std::optional<TriMesh> mesh;
  bool boundary_open = false;
  std::string error;
};

Attempt attempt(const LoadedModel& m, nn::ParamSet<float>& params, const PipelineConfig& config, const Target& t,
                double guidance_scale) {
  Attempt a;
  const auto mask = part_mask(*t.object, t.part);
  try {
    const nn::Completion c = nn::complete_part(m.model, params, config.sampling, t.object->whole, mask,
                                               inference_for(config, t.object_id, t.part, guidance_scale));
    a.mesh = c.mesh;
    a.boundary_open = c.extraction.boundary_open;
  } catch (const GeometryError& e) {
    a.error = e.what();
  } catch (const InputError& e) {
    if (std::find(mask.begin(), mask.end(), 1) != mask.end()) throw;
    a.error = e.what();  // part without a visible patch
  }
  return a;
}

}  // namespace

std::size_t cmd_complete(const PipelineConfig& config, const fs::path& checkpoint, const CompleteRequest& request,
                         const fs::path& out, const Log& log) {
  LoadedModel m = load_model(checkpoint);
  const std::vector<Target> targets = resolve_targets(request);
  LineWriter index(out / "completions.jsonl", config);
  const auto comments = echo_comments(config);
  std::size_t ok = 0;
  for (const Target& t : targets) {
    const Attempt a = attempt(m, m.checkpoint.params, config, t, config.inference.guidance_scale);
    const fs::path path = part_path(out, t.object_id, t.part);
    const bool success = a.mesh && eval::success(*a.mesh);
    if (a.mesh) {
      fs::create_directories(path.parent_path());
      save_mesh(*a.mesh, path, comments);
    } else {
      fs::remove(path);
    }
    index.write({{"object_id", t.object_id},
                 {"part", t.part},
                 {"success", success},
                 {"boundary_open", a.boundary_open},
                 {"error", a.error}});
    ok += success;
    log(t.object_id + " part " + std::to_string(t.part) + (success ? " done" : " failed " + a.error));
  }
  return ok;
}

eval::EvalReport cmd_eval(const PipelineConfig& config, const fs::path& pred, const fs::path& gt, const fs::path& out,
                          const Log& log) {
  const std::vector<PartRef> refs = read_part_set(gt / "parts.jsonl");
  if (refs.empty()) throw InputError("ground-truth set " + gt.string() + " is empty");
  std::vector<TriMesh> gts;
  for (const PartRef& r : refs) {
    const fs::path p = part_path(gt, r.object_id, r.part);
    if (!fs::exists(p)) throw InputError("missing ground truth " + p.string());
    gts.push_back(load_mesh(p).mesh);
  }
  std::vector<eval::PartResult> results(refs.size());
  const eval::EvalOptions opt = eval_options(config);
  parallel_for(refs.size(), [&](std::size_t i) {
    const fs::path p = part_path(pred, refs[i].object_id, refs[i].part);
    const TriMesh mesh = fs::exists(p) ? load_mesh(p).mesh : TriMesh{};
    results[i] = eval::evaluate_part(mesh, gts[i], opt);
    results[i].object_id = refs[i].object_id;
    results[i].part = refs[i].part;
    results[i].category = refs[i].category;
  });
  const eval::EvalReport report = eval::aggregate(results, eval_echo(config, config.inference.guidance_scale));
  LineWriter lines(out / "parts.jsonl", config);
  for (const auto& r : results) lines.write(eval::to_json(r));
  write_text(out / "report.csv", eval::report_csv(report));
  write_text(out / "report.json", eval::to_json(report).dump(2) + "\n");
  log("evaluated " + std::to_string(results.size()) + " parts, success rate " + fmt(report.success_rate));
  return report;
}

std::vector<eval::SweepColumn> cmd_sweep(const PipelineConfig& config, const fs::path& checkpoint,
                                         const fs::path& dataset, const fs::path& set, std::span<const double> scales,
                                         const fs::path& out, const Log& log) {
  if (scales.empty()) throw InputError("no guidance scales given");
  LoadedModel m = load_model(checkpoint);
  CompleteRequest request;
  request.dataset = dataset;
  request.set = set;
  const std::vector<Target> targets = resolve_targets(request);
  if (targets.empty()) throw InputError("evaluation set " + set.string() + " is empty");
  const std::vector<PartRef> refs = read_part_set(set);
  std::vector<TriMesh> gts;
  for (const PartRef& r : refs) {
    const fs::path p = part_path(set.parent_path(), r.object_id, r.part);
    if (!fs::exists(p)) throw InputError("missing ground truth " + p.string());
    gts.push_back(load_mesh(p).mesh);
  }
  const eval::EvalOptions opt = eval_options(config);
  std::vector<eval::SweepColumn> columns;
  for (const double s : scales) {
    std::vector<eval::PartResult> results(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const Attempt a = attempt(m, m.checkpoint.params, config, targets[i], s);
      results[i] = eval::evaluate_part(a.mesh ? *a.mesh : TriMesh{}, gts[i], opt);
      results[i].object_id = refs[i].object_id;
      results[i].part = refs[i].part;
      results[i].category = refs[i].category;
    }
    eval::EvalReport report = eval::aggregate(results, eval_echo(config, s));
    std::ostringstream name;
    name << "scale_" << s;
    LineWriter lines(out / name.str() / "parts.jsonl", config);
    for (const auto& r : results) lines.write(eval::to_json(r));
    write_text(out / name.str() / "report.csv", eval::report_csv(report));
    write_text(out / name.str() / "report.json", eval::to_json(report).dump(2) + "\n");
    log("scale " + fmt(s) + ": success rate " + fmt(report.success_rate) +
        (report.instance_mean ? ", chamfer " + fmt(report.instance_mean->chamfer) : ""));
    columns.push_back({s, std::move(report)});
  }
  write_text(out / "sweep.csv", eval::sweep_csv(columns, to_json(config)));
  return columns;
}

}  // namespace holopart::pipeline
