#include "holopart/eval.hpp"
#include "holopart/primitives.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace holopart;
using namespace holopart::eval;

namespace {

double brute_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  const auto directed = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    double sum = 0.0;
    for (const Vec3& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& q : to) best = std::min(best, (p - q).squaredNorm());
      sum += std::sqrt(best);
    }
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * (directed(a, b) + directed(b, a));
}

std::vector<Vec3> random_cloud(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> out(n);
  for (auto& p : out) p = Vec3(u(rng), u(rng), u(rng));
  return out;
}

field::OccGrid grid(int res, std::vector<std::uint8_t> values) {
  field::OccGrid g;
  g.resolution = {res, res, res};
  g.domain = {Vec3(-1, -1, -1), Vec3(1, 1, 1)};
  g.values = std::move(values);
  return g;
}

field::OccGrid random_grid(int res, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution b(p);
  std::vector<std::uint8_t> v(static_cast<std::size_t>(res) * res * res);
  for (auto& x : v) x = b(rng);
  return grid(res, std::move(v));
}

PartResult ok(const std::string& category, double chamfer, double iou = 0.5, double f = 0.5) {
  PartResult r;
  r.category = category;
  r.success = true;
  r.chamfer = chamfer;
  r.iou = iou;
  r.fscore = f;
  return r;
}

}  // namespace

TEST_CASE("chamfer examples and symmetry") {
  const std::vector<Vec3> a{Vec3::Zero()}, b{Vec3(1, 0, 0)};
  CHECK(chamfer_l1(a, b) == 1.0);
  std::mt19937_64 rng(3);
  const auto x = random_cloud(500, rng), y = random_cloud(300, rng);
  CHECK(chamfer_l1(x, x) == 0.0);
  CHECK(chamfer_l1(x, y) == chamfer_l1(y, x));
  CHECK_THROWS_AS(chamfer_l1(x, std::vector<Vec3>{}), InputError);
}

TEST_CASE("kd-tree chamfer equals brute force") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_cloud(1000, rng), y = random_cloud(1000, rng);
    CHECK(std::abs(chamfer_l1(x, y) - brute_chamfer(x, y)) <= 1e-9);
  }
}

TEST_CASE("iou and fscore") {
  std::mt19937_64 rng(5);
  const auto a = random_grid(16, 0.3, rng);
  CHECK(iou(a, a) == 1.0);
  CHECK(fscore(a, a) == 1.0);
  CHECK(iou(grid(2, std::vector<std::uint8_t>(8, 0)), grid(2, std::vector<std::uint8_t>(8, 0))) == 1.0);
  CHECK(fscore(grid(2, std::vector<std::uint8_t>(8, 0)), grid(2, std::vector<std::uint8_t>(8, 0))) == 0.0);

  const auto left = grid(2, {1, 1, 0, 0, 0, 0, 0, 0}), right = grid(2, {0, 0, 0, 0, 1, 1, 0, 0});
  CHECK(iou(left, right) == 0.0);
  CHECK(fscore(left, right) == 0.0);

  // A contains B with twice its size: precision 1/2, recall 1.
  const auto big = grid(2, {1, 1, 1, 1, 0, 0, 0, 0}), small = grid(2, {1, 1, 0, 0, 0, 0, 0, 0});
  CHECK(fscore(big, small) == doctest::Approx(2.0 / 3.0));
  CHECK(iou(big, small) == 0.5);

  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_grid(64, 0.2, rng), g = random_grid(64, 0.4, rng);
    std::size_t np = 0, ng = 0, both = 0, either = 0;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      np += p.values[i];
      ng += g.values[i];
      both += p.values[i] & g.values[i];
      either += p.values[i] | g.values[i];
    }
    const double precision = double(both) / double(np), recall = double(both) / double(ng);
    CHECK(iou(p, g) == double(both) / double(either));
    CHECK(fscore(p, g) == 2.0 * precision * recall / (precision + recall));
    CHECK(iou(p, g) >= 0.0);
    CHECK(fscore(p, g) <= 1.0);
  }
  CHECK_THROWS_AS(iou(grid(2, std::vector<std::uint8_t>(8, 0)), random_grid(3, 0.5, rng)), InputError);
}

TEST_CASE("success rule") {
  CHECK_FALSE(success(TriMesh{}));
  CHECK_FALSE(success(std::optional<TriMesh>{}));
  const TriMesh sphere = make_icosphere(Vec3::Zero(), 0.5, 2);
  CHECK(success(sphere));
  CHECK(success(sphere, AABB{Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5)}));
  CHECK_FALSE(success(sphere, AABB{Vec3(-0.4, -0.4, -0.4), Vec3(0.4, 0.4, 0.4)}));
  const TriMesh tetra{{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)}, {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}}, {}};
  CHECK_FALSE(success(tetra));

  // Twelve fins sharing one edge.
  TriMesh fan;
  fan.vertices = {Vec3(0, 0, 0), Vec3(0, 0, 1)};
  for (int i = 0; i < 12; ++i) {
    const double a = i * 0.5;
    fan.vertices.emplace_back(std::cos(a), std::sin(a), 0.5);
    fan.faces.push_back({0, 1, i + 2});
  }
  CHECK_FALSE(success(fan));
}

TEST_CASE("evaluate_part oracles") {
  EvalOptions opt;
  opt.n_points = 5000;
  const TriMesh gt = make_icosphere(Vec3(0.1, 0.0, -0.2), 0.3, 3);
  const PartResult same = evaluate_part(gt, gt, opt);
  CHECK(same.success);
  CHECK(same.chamfer == 0.0);
  CHECK(same.iou == 1.0);
  CHECK(same.fscore == 1.0);

  const TriMesh tiny = make_icosphere(Vec3::Zero(), 0.01, 2);
  const TriMesh moved = rigid_transformed(tiny, Eigen::Matrix3d::Identity(), Vec3(0.5, 0, 0));
  const PartResult far = evaluate_part(moved, tiny, opt);
  CHECK(far.success);
  CHECK(far.chamfer <= 0.5);
  CHECK(far.chamfer >= 0.48);
  CHECK(far.iou == 0.0);

  CHECK_FALSE(evaluate_part(TriMesh{}, gt, opt).success);
  CHECK_THROWS_AS(evaluate_part(gt, TriMesh{}, opt), InputError);
}

TEST_CASE("solid occupancy grid of a box") {
  const TriMesh cube = make_box({Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5)});
  const auto g = occupancy_grid(mesh_occupancy(cube), 8, {Vec3(-1, -1, -1), Vec3(1, 1, 1)});
  CHECK(g.count() == 64);  // the middle 4^3 cells
}

TEST_CASE("aggregate means") {
  const std::vector<PartResult> results{ok("a", 0.2), ok("a", 0.4), ok("b", 0.6)};
  const EvalReport r = aggregate(results);
  REQUIRE(r.instance_mean);
  CHECK(r.instance_mean->chamfer == doctest::Approx(0.4));
  CHECK(r.category_mean->chamfer == doctest::Approx(0.45));
  CHECK(r.success_rate == 1.0);

  std::vector<PartResult> shuffled = results;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(aggregate(shuffled).category_mean->chamfer == doctest::Approx(r.category_mean->chamfer).epsilon(1e-15));

  std::vector<PartResult> failures(3);
  const EvalReport none = aggregate(failures);
  CHECK(none.success_rate == 0.0);
  CHECK(none.categories.empty());
  CHECK_FALSE(none.instance_mean);
  CHECK_THROWS_AS(aggregate(std::vector<PartResult>{}), InputError);
}

TEST_CASE("four-category table matches hand computation") {
  std::vector<PartResult> results{ok("bed", 0.03, 0.6, 0.7),   ok("bed", 0.05, 0.4, 0.5),
                                  ok("table", 0.02, 0.8, 0.9), ok("lamp", 0.04, 0.5, 0.6),
                                  ok("lamp", 0.06, 0.3, 0.4),  ok("lamp", 0.08, 0.1, 0.2),
                                  ok("chair", 0.01, 0.9, 0.95)};
  PartResult failed;
  failed.category = "chair";
  results.push_back(failed);
  const EvalReport r = aggregate(results);
  CHECK(r.success_rate == doctest::Approx(7.0 / 8.0));
  REQUIRE(r.categories.size() == 4);
  CHECK(r.categories[0].category == "bed");
  CHECK(r.categories[0].chamfer == doctest::Approx(0.04));
  CHECK(r.categories[1].category == "chair");
  CHECK(r.categories[1].parts == 2);
  CHECK(r.categories[1].successes == 1);
  CHECK(r.categories[2].iou == doctest::Approx(0.3));
  CHECK(r.instance_mean->chamfer == doctest::Approx(0.29 / 7.0));
  CHECK(r.instance_mean->fscore == doctest::Approx(4.25 / 7.0));
  CHECK(r.category_mean->chamfer == doctest::Approx((0.04 + 0.01 + 0.06 + 0.02) / 4.0));
  CHECK(r.category_mean->iou == doctest::Approx((0.5 + 0.9 + 0.3 + 0.8) / 4.0));

  const std::string csv = report_csv(r);
  CHECK(csv.rfind("# config", 0) == 0);
  CHECK(csv.find("metric,bed,chair,lamp,table,mean (instance),mean (category)") != std::string::npos);
  CHECK(csv.find("success_rate,0.875000") != std::string::npos);
  CHECK(part_result_from_json(to_json(results[2])).chamfer == 0.02);
}

TEST_CASE("sweep table shape") {
  std::vector<SweepColumn> cols;
  for (const double s : {1.5, 3.5, 5.0, 7.5}) cols.push_back({s, aggregate(std::vector<PartResult>{ok("x", s / 100)})});
  const std::string csv = sweep_csv(cols, {{"n_steps", 50}});
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (std::size_t end; (end = csv.find('\n', start)) != std::string::npos; start = end + 1)
    lines.push_back(csv.substr(start, end - start));
  REQUIRE(lines.size() == 6);
  CHECK(lines[1] == "metric,S=1.5,S=3.5,S=5,S=7.5");
  CHECK(lines[2].rfind("chamfer,0.015000,0.035000,0.050000,0.075000", 0) == 0);
  for (std::size_t i = 2; i < lines.size(); ++i) CHECK(std::count(lines[i].begin(), lines[i].end(), ',') == 4);
}
