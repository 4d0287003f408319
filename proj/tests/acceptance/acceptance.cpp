// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--criterion N]... [--workdir DIR] [--cli PATH] [--assemblies N]
//
// Criteria 6-9 write into the work directory. The end-to-end model of criterion 7 is kept
// there and reused by criterion 8 (and by later runs with the same config).

#include "fixtures.hpp"
#include "gradcheck.hpp"

#include "holopart/curation.hpp"
#include "holopart/eval.hpp"
#include "holopart/field.hpp"
#include "holopart/mesh_io.hpp"
#include "holopart/nn/flow.hpp"
#include "holopart/nn/inference.hpp"
#include "holopart/nn/train.hpp"
#include "holopart/pipeline.hpp"
#include "holopart/sampling.hpp"
#include "holopart/spatial.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>

using namespace holopart;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kChamferOracleTol = 1e-9;
constexpr double kMetricRuntime = 60.0;
constexpr double kGradientRuntime = 300.0;
constexpr double kEulerTol = 1e-9;
constexpr double kSphereAreaTol = 0.02;
constexpr double kLocalGlobalCells = 2.0;
constexpr double kGeometryRuntime = 120.0;
constexpr double kOverfitIou = 0.90;
constexpr double kOverfitBudget = 15.0 * 60.0;
constexpr double kTrainBudget = 4.0 * 3600.0;
constexpr double kMinSuccessRate = 0.95;
constexpr std::size_t kHeldOutParts = 50;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

void progress(const std::string& msg) { std::fprintf(stderr, "  %s\n", msg.c_str()); }

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// --- 1: metric oracles ---------------------------------------------------------------------

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec3> a(1000), b(1000);
    for (auto& p : a) p = Vec3(u(rng), u(rng), u(rng));
    for (auto& p : b) p = Vec3(u(rng), u(rng), u(rng)) * 0.8 + Vec3::Constant(0.1);
    const auto one_way = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
      double sum = 0.0;
      for (const Vec3& p : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& q : to) best = std::min(best, (p - q).squaredNorm());
        sum += std::sqrt(best);
      }
      return sum / static_cast<double>(from.size());
    };
    const double brute = 0.5 * (one_way(a, b) + one_way(b, a));
    worst = std::max(worst, std::abs(eval::chamfer_l1(a, b) - brute));
  }

  std::size_t mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    field::OccGrid g[2];
    const double density[2] = {0.05 + 0.009 * trial, 0.95 - 0.009 * trial};
    for (int k = 0; k < 2; ++k) {
      g[k].resolution = {64, 64, 64};
      g[k].domain = {Vec3(-1, -1, -1), Vec3(1, 1, 1)};
      std::bernoulli_distribution on(density[k]);
      g[k].values.resize(64 * 64 * 64);
      for (auto& v : g[k].values) v = on(rng);
    }
    std::size_t na = 0, nb = 0, both = 0, either = 0;
    for (std::size_t i = 0; i < g[0].values.size(); ++i) {
      const bool x = g[0].values[i], y = g[1].values[i];
      na += x;
      nb += y;
      both += x && y;
      either += x || y;
    }
    const double iou = either == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(either);
    const double precision = static_cast<double>(both) / static_cast<double>(na);
    const double recall = static_cast<double>(both) / static_cast<double>(nb);
    const double f = both == 0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    mismatches += eval::iou(g[0], g[1]) != iou;
    mismatches += eval::fscore(g[0], g[1]) != f;
  }
  const double secs = since(t0);
  return {worst <= kChamferOracleTol && mismatches == 0 && secs < kMetricRuntime,
          fmt("max chamfer deviation %.2e over 100 pairs, %zu IoU/F mismatches over 100 grid pairs, %.1fs", worst,
              mismatches, secs)};
}

// --- 2: gradients ---------------------------------------------------------------------------

Outcome gradients() {
  const auto t0 = Clock::now();
  const nn::ModelConfig c = gradcheck::tiny_config();
  nn::ParamSet<double> params = nn::init_params<double>(c, 1);
  gradcheck::randomize(params, 2);
  const auto flow = gradcheck::check(params, gradcheck::flow_loss_fixture(c, 3), nn::is_flow_param);
  const auto vae = gradcheck::check(params, gradcheck::vae_loss_fixture(c, 4), nn::is_vae_param);
  std::size_t expected_blocks = 0;
  for (const auto& p : params.all()) expected_blocks += nn::is_flow_param(p.name) || nn::is_vae_param(p.name);
  const std::size_t blocks = flow.blocks.size() + vae.blocks.size();
  const double secs = since(t0);
  const double worst = std::max(flow.max_relative, vae.max_relative);
  return {params.scalar_count() <= 5000 && blocks == expected_blocks && worst <= gradcheck::kMaxRelativeError &&
              secs < kGradientRuntime,
          fmt("%zu blocks, %zu parameters, max relative error %.2e (flow %.2e at %s, vae %.2e at %s), %.1fs", blocks,
              params.scalar_count(), worst, flow.max_relative, flow.worst.c_str(), vae.max_relative,
              vae.worst.c_str(), secs)};
}

// --- 3: flow algebra ------------------------------------------------------------------------

Outcome flow_algebra() {
  const nn::LatentMatrix z0 = nn::gaussian_matrix(16, 8, 1), eps = nn::gaussian_matrix(16, 8, 2);
  bool ok = nn::forward_noise(z0, 0.0, eps).z_t == z0 && nn::forward_noise(z0, 1.0, eps).z_t == eps;
  const nn::LatentMatrix vc = nn::gaussian_matrix(16, 8, 3), vu = nn::gaussian_matrix(16, 8, 4);
  ok = ok && nn::cfg_velocity(vc, vu, 1.0) == vc && nn::cfg_velocity(vc, vu, 0.0) == vu;
  double worst = 0.0;
  for (const int steps : {1, 10, 50}) {
    const std::uint64_t seed = 40 + static_cast<std::uint64_t>(steps);
    const nn::LatentMatrix noise = nn::gaussian_matrix(16, 8, seed);
    const nn::VelocityField oracle = [&](const nn::LatentMatrix&, double) { return nn::LatentMatrix(noise - z0); };
    worst = std::max(worst, (nn::sample_latents(oracle, 16, 8, steps, seed) - z0).cwiseAbs().maxCoeff());
  }
  return {ok && worst <= kEulerTol,
          fmt("endpoints and guidance identities %s, Euler recovery error %.2e over 1/10/50 steps",
              ok ? "exact" : "NOT exact", worst)};
}

// --- 4: geometry ----------------------------------------------------------------------------

Outcome geometry() {
  const auto t0 = Clock::now();
  const int res = 128;
  const double r = 0.5;
  field::ScalarGrid g;
  g.resolution = {res, res, res};
  g.domain = {Vec3(-1, -1, -1), Vec3(1, 1, 1)};
  g.values.resize(static_cast<std::size_t>(res) * res * res);
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j)
      for (int k = 0; k < res; ++k) g.values[g.index(i, j, k)] = g.sample_position(i, j, k).norm() - r;
  const TriMesh sphere = field::marching_cubes(g, 0.0);
  const double exact = 4.0 * std::numbers::pi * r * r;
  const double area_err = std::abs(surface_area(sphere) - exact) / exact;
  const bool closed = is_edge_manifold_closed(sphere);

  // Local extraction of an off-center ellipsoid against the global lattice.
  const Vec3 c(0.15, -0.1, 0.05);
  const Vec3 radii(0.35, 0.25, 0.3);
  const field::OccupancyFn occ = [&](std::span<const Vec3> pts) {
    std::vector<double> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = 10.0 * (1.0 - (pts[i] - c).cwiseQuotient(radii).norm());
    return out;
  };
  const field::LocalExtraction local = field::local_marching_cubes(occ, {c - radii, c + radii}, 1.3, 64);
  std::vector<Vec3> pts;
  pts.reserve(g.values.size());
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j)
      for (int k = 0; k < res; ++k) pts.push_back(g.sample_position(i, j, k));
  const auto logits = occ(pts);
  for (std::size_t i = 0; i < logits.size(); ++i) g.values[i] = -logits[i];
  const TriMesh global = field::marching_cubes(g, 0.0);
  const double chamfer = eval::chamfer_l1(sampling::sample_surface(local.mesh, 20000, 1).positions,
                                          sampling::sample_surface(global, 20000, 2).positions);
  const double cell = g.cell_size().x();
  const double secs = since(t0);
  return {area_err <= kSphereAreaTol && closed && chamfer <= kLocalGlobalCells * cell && secs < kGeometryRuntime,
          fmt("sphere area error %.3f%%, %s; local vs global chamfer %.2f cells; %.1fs", 100.0 * area_err,
              closed ? "closed edge-manifold" : "NOT closed", chamfer / cell, secs)};
}

// --- 5: curation ----------------------------------------------------------------------------

Outcome curation_fixture(const fs::path& work) {
  const fs::path dir = work / "curation";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto corpus = fixtures::curation_corpus();
  {
    std::ofstream manifest(dir / "corpus.jsonl");
    for (const auto& obj : corpus) {
      nlohmann::json parts = nlohmann::json::array();
      for (std::size_t k = 0; k < obj.parts.size(); ++k) {
        const std::string name = obj.id + "_" + std::to_string(k) + ".ply";
        save_mesh(obj.parts[k], dir / name);
        parts.push_back(name);
      }
      manifest << nlohmann::json{{"id", obj.id}, {"parts", parts}}.dump() << "\n";
    }
  }
  const auto decisions = curation::curate(corpus);
  const std::vector<curation::Rule> expected = {curation::Rule::none,       curation::Rule::none,
                                                curation::Rule::mesh_count, curation::Rule::components,
                                                curation::Rule::dominance,  curation::Rule::none};
  std::string verdicts;
  bool match = decisions.size() == expected.size();
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    verdicts += decisions[i].pass ? "P" : "F";
    match = match && i < expected.size() && decisions[i].failed_rule == expected[i] &&
            decisions[i].pass == (expected[i] == curation::Rule::none);
  }
  const PipelineConfig cfg = preset_config("desk");
  const pipeline::Log quiet = [](const std::string&) {};
  pipeline::cmd_curate(cfg, dir / "corpus.jsonl", dir / "run_a", quiet);
  pipeline::cmd_curate(cfg, dir / "corpus.jsonl", dir / "run_b", quiet);
  const bool identical = slurp(dir / "run_a" / "decisions.jsonl") == slurp(dir / "run_b" / "decisions.jsonl");
  return {match && identical, fmt("verdicts %s (expected PPFFFP with rules count/components/dominance), reruns %s",
                                  verdicts.c_str(), identical ? "byte-identical" : "DIFFER")};
}

// --- 6: VAE overfit --------------------------------------------------------------------------

Outcome vae_overfit() {
  const auto t0 = Clock::now();
  const PipelineConfig cfg = preset_config("desk");
  const nn::ModelConfig& model = cfg.model;
  const synthetic::Assembly a = synthetic::gen_assembly({synthetic::Family::table, 7, 0.12});
  const auto examples = nn::make_part_examples(a.object, cfg.sampling, model, 1);
  constexpr int kViews = 8;  // independently sampled point sets per part
  std::vector<nn::ShapeExample> shapes;
  std::vector<TriMesh> locals;
  for (const auto& ex : examples) {
    const TriMesh local = transformed(a.object.parts[static_cast<std::size_t>(ex.part)], ex.prompt.to_local);
    for (int v = 0; v < kViews; ++v)
      shapes.push_back(nn::make_closed_shape_example(local, nn::local_query_box(), cfg.sampling, model.latent_tokens,
                                                     derive_seed(17, static_cast<std::uint64_t>(ex.part * kViews + v))));
    locals.push_back(local);
  }
  nn::ParamSet<float> params = nn::init_params<float>(model, 0);
  nn::OptimizerState state;
  nn::TrainOptions o;
  o.batch = cfg.train.batch;
  o.optimizer.lr = cfg.train.vae_lr;
  o.optimizer.weight_decay = cfg.train.weight_decay;
  o.optimizer.clip_norm = cfg.train.clip_norm;
  double miou = 0.0, worst = 0.0;
  long steps = 0;
  while (since(t0) < kOverfitBudget) {
    o.steps = steps += 250;
    nn::train_vae(model, params, state, shapes, o);
    double sum = 0.0;
    worst = 1.0;
    const AABB box = nn::local_query_box();
    for (std::size_t k = 0; k < locals.size(); ++k) {
      const auto z = nn::encode_mean(model, params, shapes[k * kViews]);
      const double v = eval::iou(eval::occupancy_grid(nn::latent_occupancy(model, params, z), 64, box),
                                 eval::occupancy_grid(eval::mesh_occupancy(locals[k]), 64, box));
      sum += v;
      worst = std::min(worst, v);
    }
    miou = sum / static_cast<double>(locals.size());
    progress(fmt("overfit step %ld: mean IoU %.3f (worst part %.3f), %.0fs", steps, miou, worst, since(t0)));
    if (miou >= kOverfitIou) break;
  }
  const double secs = since(t0);
  return {miou >= kOverfitIou && secs <= kOverfitBudget,
          fmt("mean part IoU %.3f at 64^3 (worst part %.3f) after %ld steps, %.0fs", miou, worst, steps, secs)};
}

// --- 7 / 8: end-to-end ----------------------------------------------------------------------

struct EndToEnd {
  PipelineConfig config;
  fs::path dataset, checkpoint, set;
  double train_seconds = 0.0;
};

/// Synthesizes the dataset and trains the model unless a finished run with the same config is
/// already in the work directory.
EndToEnd prepare_end_to_end(const fs::path& work, int assemblies) {
  EndToEnd e;
  e.config = preset_config("desk");
  const fs::path root = work / "e2e";
  e.dataset = root / "data";
  e.checkpoint = root / "model.ckpt";
  e.set = e.dataset / "eval_gt" / "parts.jsonl";
  fs::create_directories(root);
  const pipeline::Log log = [](const std::string& m) { progress(m); };
  const std::string fingerprint = to_json(e.config).dump() + " assemblies " + std::to_string(assemblies);
  const fs::path stamp = root / "fingerprint.txt", data_done = root / "data.done", timing = root / "train_seconds.txt";
  if (!fs::exists(stamp) || slurp(stamp) != fingerprint) {
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(stamp) << fingerprint;
  }
  if (!fs::exists(data_done)) {
    const auto t0 = Clock::now();
    pipeline::cmd_synth(e.config, assemblies, synthetic::kAllFamilies, e.dataset, log);
    std::ofstream(data_done) << fmt("%.1f\n", since(t0));
  }
  if (fs::exists(timing)) std::ifstream(timing) >> e.train_seconds;
  bool finished = false;
  if (fs::exists(e.checkpoint)) {
    const nn::Checkpoint ck = nn::load_checkpoint(e.checkpoint);
    finished = ck.optimizers.count("flow") && ck.optimizers.at("flow").step >= e.config.train.flow_steps &&
               ck.optimizers.at("vae").step >= e.config.train.vae_steps;
  }
  if (!finished) {
    const auto t0 = Clock::now();
    pipeline::cmd_train(e.config, e.dataset, e.checkpoint, true, log);
    e.train_seconds += since(t0);
    std::ofstream(timing) << fmt("%.1f", e.train_seconds);
  }
  return e;
}

eval::EvalOptions eval_options(const PipelineConfig& cfg) {
  eval::EvalOptions o = cfg.eval;
  o.seed = derive_seed(cfg.seed, "eval");
  return o;
}

Outcome end_to_end(const fs::path& work, int assemblies) {
  const EndToEnd e = prepare_end_to_end(work, assemblies);
  const pipeline::Log log = [](const std::string& m) { progress(m); };
  const fs::path pred = work / "e2e" / "pred";
  fs::remove_all(pred);
  pipeline::cmd_complete(e.config, e.checkpoint, {{}, std::nullopt, e.dataset, e.set}, pred, log);
  const eval::EvalReport report = pipeline::cmd_eval(e.config, pred, e.set.parent_path(), work / "e2e" / "eval", log);

  const auto refs = pipeline::read_part_set(e.set);
  const eval::EvalOptions opt = eval_options(e.config);
  std::vector<double> completed, patch;
  std::size_t better = 0;
  for (const auto& r : refs) {
    const curation::PartObject obj = curation::load_part_object(pipeline::object_dir(e.dataset, r.object_id));
    const TriMesh gt = load_mesh(pipeline::part_path(e.set.parent_path(), r.object_id, r.part)).mesh;
    std::vector<std::size_t> faces;
    for (std::size_t f = 0; f < obj.surface_masks.size(); ++f)
      if (obj.surface_masks[f] == r.part) faces.push_back(f);
    const double p = eval::evaluate_part(submesh(obj.whole, faces), gt, opt).chamfer;
    const fs::path pp = pipeline::part_path(pred, r.object_id, r.part);
    double c = std::numeric_limits<double>::infinity();  // a failed completion counts as worst
    if (fs::exists(pp)) {
      const eval::PartResult res = eval::evaluate_part(load_mesh(pp).mesh, gt, opt);
      if (res.success) c = res.chamfer;
    }
    completed.push_back(c);
    patch.push_back(p);
    better += c < p;
  }
  const double mc = median(completed), mp = median(patch);
  std::ofstream(work / "e2e" / "medians.txt") << fmt("completed %.6f\npatch %.6f\n", mc, mp);
  return {refs.size() == kHeldOutParts && mc < mp && report.success_rate >= kMinSuccessRate &&
              e.train_seconds <= kTrainBudget,
          fmt("%zu held-out parts: median chamfer completed %.4f vs visible patch %.4f (%zu/%zu parts improved), "
              "success %.3f, training %.2fh",
              refs.size(), mc, mp, better, refs.size(), report.success_rate, e.train_seconds / 3600.0)};
}

Outcome guidance_sweep(const fs::path& work, int assemblies) {
  const EndToEnd e = prepare_end_to_end(work, assemblies);
  const pipeline::Log log = [](const std::string& m) { progress(m); };
  const fs::path out = work / "e2e" / "sweep";
  const auto columns = pipeline::cmd_sweep(e.config, e.checkpoint, e.dataset, e.set,
                                           pipeline::kDefaultSweepScales, out, log);
  bool ok = columns.size() == std::size(pipeline::kDefaultSweepScales);
  std::string summary;
  double best = std::numeric_limits<double>::infinity(), best_scale = 0.0;
  for (const auto& c : columns) {
    ok = ok && c.report.success_rate >= kMinSuccessRate;
    const double ch = c.report.instance_mean ? c.report.instance_mean->chamfer : std::nan("");
    summary += fmt(" S=%g: success %.3f chamfer %.4f;", c.scale, c.report.success_rate, ch);
    if (ch < best) best = ch, best_scale = c.scale;
  }
  std::istringstream csv(slurp(out / "sweep.csv"));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) lines.push_back(line);
  const bool shaped = lines.size() == 6 && lines[1] == "metric,S=1.5,S=3.5,S=5,S=7.5" &&
                      lines[2].rfind("chamfer,", 0) == 0 && lines[3].rfind("iou,", 0) == 0 &&
                      lines[4].rfind("fscore,", 0) == 0 && lines[5].rfind("success_rate,", 0) == 0;
  return {ok && shaped, fmt("%s best chamfer at S=%g; table %s", summary.c_str(), best_scale,
                            shaped ? "well-formed" : "MALFORMED")};
}

// --- 9: CLI determinism ----------------------------------------------------------------------

Outcome cli_determinism(const fs::path& work, const std::string& cli) {
  if (cli.empty() || !fs::exists(cli)) return {false, "command-line tool not found: " + cli};
  const fs::path root = work / "determinism";
  fs::remove_all(root);
  fs::create_directories(root / "corpus");
  {
    std::ofstream manifest(root / "corpus" / "corpus.jsonl");
    for (const auto& obj : fixtures::curation_corpus()) {
      nlohmann::json parts = nlohmann::json::array();
      for (std::size_t k = 0; k < obj.parts.size(); ++k) {
        const std::string name = obj.id + "_" + std::to_string(k) + ".ply";
        save_mesh(obj.parts[k], root / "corpus" / name);
        parts.push_back(name);
      }
      manifest << nlohmann::json{{"id", obj.id}, {"parts", parts}}.dump() << "\n";
    }
    std::ofstream(root / "config.json")
        << R"({"seed": 5, "train": {"batch": 2, "vae_steps": 6, "flow_steps": 6, "snapshot_every": 3},)"
        << R"( "inference": {"n_steps": 3, "mc_resolution": 24}, "eval": {"n_points": 4000, "voxel_res": 32}})";
  }
  const std::string common = " --config " + (root / "config.json").string();
  const std::vector<std::pair<std::string, std::string>> stages = {
      {"synth", "synth --n 6 --families table,chair --out {R}/synth"},
      {"curate", "curate --manifest " + (root / "corpus" / "corpus.jsonl").string() + " --out {R}/curate"},
      {"pairs", "pairs --manifest " + (root / "corpus" / "corpus.jsonl").string() +
                    " --decisions {R}/curate/decisions.jsonl --out {R}/pairs"},
      {"train", "train --dataset {R}/synth --checkpoint {R}/train/model.ckpt"},
      {"complete", "complete --checkpoint {R}/train/model.ckpt --dataset {R}/synth --set "
                   "{R}/synth/eval_gt/parts.jsonl --out {R}/complete"},
      {"eval", "eval --pred {R}/synth/eval_gt --gt {R}/synth/eval_gt --out {R}/eval"},
      {"sweep", "sweep --checkpoint {R}/train/model.ckpt --dataset {R}/synth --set {R}/synth/eval_gt/parts.jsonl "
                "--scales 1.5,3.5 --out {R}/sweep"},
  };
  for (const char* run : {"a", "b"}) {
    const std::string r = (root / run).string();
    fs::create_directories(root / run / "train");
    for (const auto& [name, args] : stages) {
      std::string cmd = args;
      for (std::size_t at; (at = cmd.find("{R}")) != std::string::npos;) cmd.replace(at, 3, r);
      const std::string line = cli + " -q " + cmd + common + " > " + r + "/" + name + ".stdout";
      if (std::system(line.c_str()) != 0) return {false, std::string("stage ") + name + " failed: " + line};
    }
  }
  std::size_t files = 0;
  std::vector<std::string> differ;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(entry.path(), root / "a");
    if (slurp(entry.path()) != slurp(root / "b" / rel)) differ.push_back(rel.string());
  }
  std::string detail = fmt("%zu output files over %zu stages, %zu differ", files, stages.size(), differ.size());
  for (std::size_t i = 0; i < std::min<std::size_t>(differ.size(), 5); ++i) detail += " " + differ[i];
  return {differ.empty() && files > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> selected;
  std::string workdir = "acceptance_work";
  std::string cli;
  int assemblies = 500;
  app.add_option("--criterion", selected, "criteria to run (default: all)")->check(CLI::Range(1, 9));
  app.add_option("--workdir", workdir);
  app.add_option("--cli", cli, "path to the command-line tool");
  app.add_option("--assemblies", assemblies, "dataset size of the end-to-end run")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  const fs::path work = fs::absolute(workdir);
  fs::create_directories(work);

  bool all = true;
  for (const int n : selected) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      switch (n) {
        case 1: o = metric_oracles(); break;
        case 2: o = gradients(); break;
        case 3: o = flow_algebra(); break;
        case 4: o = geometry(); break;
        case 5: o = curation_fixture(work); break;
        case 6: o = vae_overfit(); break;
        case 7: o = end_to_end(work, assemblies); break;
        case 8: o = guidance_sweep(work, assemblies); break;
        case 9: o = cli_determinism(work, cli); break;
      }
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %d: %s  %s  [%.0fs]\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str(), since(t0));
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
