#include "holopart/curation.hpp"
#include "holopart/mesh_io.hpp"
#include "holopart/nn/train.hpp"
#include "holopart/pipeline.hpp"
#include "holopart/primitives.hpp"

#include <doctest.h>

#include <fstream>
#include <iterator>

using namespace holopart;
using namespace holopart::pipeline;

namespace {

const Log quiet = [](const std::string&) {};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "holopart_test_pipeline" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

PipelineConfig tiny_config() {
  PipelineConfig c = preset_config("desk");
  c.train.batch = 2;
  c.train.vae_steps = 4;
  c.train.flow_steps = 4;
  c.train.snapshot_every = 2;
  c.inference.n_steps = 2;
  c.inference.mc_resolution = 16;
  c.eval.n_points = 2000;
  c.eval.voxel_res = 16;
  return c;
}

// Small synthetic dataset shared by the cases below.
const fs::path& dataset() {
  static const fs::path dir = [] {
    const fs::path d = scratch("dataset");
    const synthetic::Family fams[] = {synthetic::Family::table, synthetic::Family::chair};
    cmd_synth(tiny_config(), 6, fams, d, quiet);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("synth writes a dataset with an evaluation set") {
  const auto items = read_dataset_manifest(dataset());
  CHECK(items.size() == 6);
  const auto refs = read_part_set(dataset() / "eval_gt" / "parts.jsonl");
  REQUIRE(!refs.empty());
  for (const auto& r : refs) {
    CHECK(fs::exists(part_path(dataset() / "eval_gt", r.object_id, r.part)));
    CHECK(fs::exists(object_dir(dataset(), r.object_id) / "masks.json"));
  }
  CHECK(slurp(dataset() / "manifest.jsonl").rfind("{\"config\":", 0) == 0);
  CHECK(slurp(part_path(dataset() / "eval_gt", refs[0].object_id, refs[0].part)).find("comment holopart config") !=
        std::string::npos);
}

TEST_CASE("synth output is byte-identical across runs") {
  const synthetic::Family fams[] = {synthetic::Family::lamp};
  const fs::path a = scratch("synth_a"), b = scratch("synth_b");
  cmd_synth(tiny_config(), 2, fams, a, quiet);
  cmd_synth(tiny_config(), 2, fams, b, quiet);
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    CHECK(slurp(entry.path()) == slurp(b / fs::relative(entry.path(), a)));
  }
}

TEST_CASE("eval of the ground truth against itself is perfect") {
  const fs::path out = scratch("eval_self");
  const eval::EvalReport r = cmd_eval(tiny_config(), dataset() / "eval_gt", dataset() / "eval_gt", out, quiet);
  CHECK(r.success_rate == 1.0);
  REQUIRE(r.instance_mean);
  CHECK(r.instance_mean->chamfer == 0.0);
  CHECK(r.instance_mean->iou == 1.0);
  CHECK(r.instance_mean->fscore == 1.0);
  CHECK(fs::exists(out / "report.csv"));
  CHECK(fs::exists(out / "parts.jsonl"));
}

TEST_CASE("eval input errors") {
  const fs::path gt = scratch("eval_gt_missing");
  fs::copy_file(dataset() / "eval_gt" / "parts.jsonl", gt / "parts.jsonl");
  CHECK_THROWS_AS(cmd_eval(tiny_config(), dataset() / "eval_gt", gt, scratch("eval_out"), quiet), InputError);

  // Missing predictions are failures, not errors.
  const eval::EvalReport r = cmd_eval(tiny_config(), scratch("no_pred"), dataset() / "eval_gt", scratch("eval_out2"), quiet);
  CHECK(r.success_rate == 0.0);
  CHECK(!r.instance_mean);

  const fs::path empty = scratch("eval_empty");
  std::ofstream(empty / "parts.jsonl") << "";
  CHECK_THROWS_AS(cmd_eval(tiny_config(), empty, empty, scratch("eval_out3"), quiet), InputError);
}

TEST_CASE("train, resume and complete") {
  const fs::path dir = scratch("train");
  PipelineConfig cfg = tiny_config();
  cmd_train(cfg, dataset(), dir / "direct.ckpt", false, quiet);

  PipelineConfig first = cfg;
  first.train.flow_steps = 2;
  cmd_train(first, dataset(), dir / "resumed.ckpt", false, quiet);
  CHECK(nn::load_checkpoint(dir / "resumed.ckpt").optimizers.at("flow").step == 2);
  cmd_train(cfg, dataset(), dir / "resumed.ckpt", true, quiet);
  const nn::Checkpoint resumed = nn::load_checkpoint(dir / "resumed.ckpt");
  CHECK(resumed.optimizers.at("vae").step == 4);
  CHECK(resumed.optimizers.at("flow").step == 4);
  CHECK(slurp(dir / "direct.ckpt") == slurp(dir / "resumed.ckpt"));

  // The flow log continues after the resume point rather than restarting.
  std::ifstream log(dir / "resumed.ckpt.flow.csv");
  std::string line;
  std::vector<std::string> steps;
  while (std::getline(log, line))
    if (!line.empty() && std::isdigit(static_cast<unsigned char>(line[0]))) steps.push_back(line.substr(0, line.find(',')));
  CHECK(steps == std::vector<std::string>{"1", "2", "3", "4"});

  PipelineConfig other = cfg;
  other.model.width = 64;
  CHECK_THROWS_AS(cmd_train(other, dataset(), dir / "resumed.ckpt", true, quiet), InputError);

  const auto refs = read_part_set(dataset() / "eval_gt" / "parts.jsonl");
  CompleteRequest bad{object_dir(dataset(), refs[0].object_id), 99, {}, {}};
  CHECK_THROWS_AS(cmd_complete(cfg, dir / "direct.ckpt", bad, scratch("bad"), quiet), InputError);

  CompleteRequest req{{}, std::nullopt, dataset(), dataset() / "eval_gt" / "parts.jsonl"};
  const fs::path a = scratch("complete_a"), b = scratch("complete_b");
  cmd_complete(cfg, dir / "direct.ckpt", req, a, quiet);
  cmd_complete(cfg, dir / "direct.ckpt", req, b, quiet);
  CHECK(slurp(a / "completions.jsonl") == slurp(b / "completions.jsonl"));
  for (const auto& r : refs) CHECK(slurp(part_path(a, r.object_id, r.part)) == slurp(part_path(b, r.object_id, r.part)));
}

TEST_CASE("training needs training parts") {
  const fs::path dir = scratch("no_train");
  std::ofstream(dir / "manifest.jsonl") << "{\"id\": \"x\", \"split\": \"test\"}\n";
  CHECK_THROWS_AS(cmd_train(tiny_config(), dir, dir / "m.ckpt", false, quiet), InputError);
  CHECK_THROWS_AS(cmd_train(tiny_config(), scratch("nothing"), dir / "m.ckpt", false, quiet), InputError);
}

TEST_CASE("completion needs a trained part model") {
  const fs::path dir = scratch("untrained");
  PipelineConfig cfg = tiny_config();
  cfg.train.flow_steps = 0;
  cmd_train(cfg, dataset(), dir / "vae_only.ckpt", false, quiet);
  CompleteRequest req{{}, std::nullopt, dataset(), dataset() / "eval_gt" / "parts.jsonl"};
  CHECK_THROWS_AS(cmd_complete(cfg, dir / "vae_only.ckpt", req, dir / "out", quiet), InputError);
}

TEST_CASE("curate and pairs") {
  const fs::path dir = scratch("curate");
  save_mesh(make_box({Vec3(-0.5, -0.5, -0.1), Vec3(0.5, 0.5, 0.1)}), dir / "top.ply");
  save_mesh(make_cylinder(Vec3(0, 0, -0.8), Vec3(0, 0, -0.1), 0.1), dir / "leg.ply");
  save_mesh(make_icosphere(Vec3(0, 0, 0), 0.5, 2), dir / "ball.ply");
  std::ofstream(dir / "corpus.jsonl") << R"({"id": "stand", "category": "table", "parts": ["top.ply", "leg.ply"]})"
                                      << "\n"
                                      << R"({"id": "ball", "parts": ["ball.ply"]})" << "\n";
  cmd_curate(tiny_config(), dir / "corpus.jsonl", dir / "cur", quiet);
  const std::string decisions = slurp(dir / "cur" / "decisions.jsonl");
  CHECK(decisions.find("\"id\":\"stand\"") != std::string::npos);
  CHECK(decisions.find("\"failed_rule\":\"mesh_count\"") != std::string::npos);

  const std::size_t n = cmd_pairs(tiny_config(), dir / "corpus.jsonl", dir / "cur" / "decisions.jsonl", dir / "ds", quiet);
  CHECK(n == 1);
  const auto items = read_dataset_manifest(dir / "ds");
  REQUIRE(items.size() == 1);
  CHECK(items[0].id == "stand");
  CHECK(items[0].category == "table");
  const curation::PartObject obj = curation::load_part_object(object_dir(dir / "ds", "stand"));
  CHECK(obj.parts.size() == 2);

  std::ofstream(dir / "empty.jsonl") << "\n";
  CHECK_THROWS_AS(cmd_curate(tiny_config(), dir / "empty.jsonl", dir / "cur2", quiet), InputError);
}
