#include "holopart/eval.hpp"

#include "holopart/sampling.hpp"
#include "holopart/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <sstream>
#include <unordered_map>

namespace holopart::eval {

namespace {

double mean_nearest(std::span<const Vec3> from, const KdTree& to) {
  double sum = 0.0;
  for (const Vec3& p : from) sum += std::sqrt(to.nearest(p).distance_sq);
  return sum / static_cast<double>(from.size());
}

void check_same_lattice(const field::OccGrid& a, const field::OccGrid& b) {
  if (a.resolution != b.resolution || a.values.size() != b.values.size())
    throw InputError("occupancy grids differ in resolution");
  if (a.domain.min != b.domain.min || a.domain.max != b.domain.max) throw InputError("occupancy grids differ in domain");
}

struct Counts {
  std::size_t a = 0, b = 0, both = 0;
};

Counts count(const field::OccGrid& a, const field::OccGrid& b) {
  Counts c;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const bool x = a.values[i] != 0, y = b.values[i] != 0;
    c.a += x;
    c.b += y;
    c.both += x && y;
  }
  return c;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

double chamfer_l1(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw InputError("chamfer_l1 needs two nonempty clouds");
  const KdTree ta(a), tb(b);
  return 0.5 * (mean_nearest(a, tb) + mean_nearest(b, ta));
}

double iou(const field::OccGrid& a, const field::OccGrid& b) {
  check_same_lattice(a, b);
  const Counts c = count(a, b);
  const std::size_t uni = c.a + c.b - c.both;
  if (uni == 0) return 1.0;
  return static_cast<double>(c.both) / static_cast<double>(uni);
}

double fscore(const field::OccGrid& pred, const field::OccGrid& gt) {
  check_same_lattice(pred, gt);
  const Counts c = count(pred, gt);
  if (c.both == 0) return 0.0;
  const double precision = static_cast<double>(c.both) / static_cast<double>(c.a);
  const double recall = static_cast<double>(c.both) / static_cast<double>(c.b);
  return 2.0 * precision * recall / (precision + recall);
}

bool success(const TriMesh& mesh, const std::optional<AABB>& box) {
  if (mesh.faces.size() < kMinSuccessFaces) return false;
  std::unordered_map<std::uint64_t, int> uses;
  uses.reserve(mesh.faces.size() * 3);
  for (const Face& f : mesh.faces) {
    for (int c = 0; c < 3; ++c) {
      auto a = static_cast<std::uint64_t>(f[c]);
      auto b = static_cast<std::uint64_t>(f[(c + 1) % 3]);
      if (a > b) std::swap(a, b);
      if (++uses[(a << 32) | b] > 2) return false;
    }
  }
  if (box) {
    const double tol = 1e-9 * box->extent().maxCoeff();
    for (const Vec3& v : mesh.vertices)
      if (!box->contains(v, tol)) return false;
  }
  return true;
}

bool success(const std::optional<TriMesh>& mesh, const std::optional<AABB>& box) {
  return mesh.has_value() && success(*mesh, box);
}

field::OccGrid occupancy_grid(const field::OccupancyFn& occupancy, int resolution, const AABB& domain) {
  if (resolution < 1) throw InputError("occupancy grid resolution must be positive");
  field::OccGrid grid;
  grid.resolution = {resolution, resolution, resolution};
  grid.domain = domain;
  grid.values.assign(static_cast<std::size_t>(resolution) * resolution * resolution, 0);
  const Vec3 cell = domain.extent() / resolution;
  std::vector<Vec3> slab;
  slab.reserve(static_cast<std::size_t>(resolution) * resolution);
  for (int i = 0; i < resolution; ++i) {
    slab.clear();
    for (int j = 0; j < resolution; ++j)
      for (int k = 0; k < resolution; ++k)
        slab.push_back(domain.min + Vec3((i + 0.5) * cell.x(), (j + 0.5) * cell.y(), (k + 0.5) * cell.z()));
    const std::vector<double> logits = occupancy(slab);
    for (std::size_t n = 0; n < slab.size(); ++n)
      grid.values[grid.index(i, 0, 0) + n] = logits[n] > 0.0 ? 1 : 0;
  }
  return grid;
}

field::OccupancyFn mesh_occupancy(const TriMesh& closed) {
  auto tester = std::make_shared<InsideTester>(closed);
  return [tester](std::span<const Vec3> points) {
    std::vector<double> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = tester->inside(points[i]) ? 1.0 : -1.0;
    return out;
  };
}

PartResult evaluate_part(const TriMesh& pred, const TriMesh& gt, const EvalOptions& options) {
  if (gt.empty()) throw InputError("ground-truth part is empty");
  PartResult r;
  r.success = success(pred);
  if (!r.success) return r;
  const PointCloud a = sampling::sample_surface(pred, options.n_points, derive_seed(options.seed, "eval-surface"));
  const PointCloud b = sampling::sample_surface(gt, options.n_points, derive_seed(options.seed, "eval-surface"));
  r.chamfer = chamfer_l1(a.positions, b.positions);
  const field::OccGrid ga = field::voxelize_points(a.positions, options.voxel_res, options.domain).grid;
  const field::OccGrid gb = field::voxelize_points(b.positions, options.voxel_res, options.domain).grid;
  r.iou = iou(ga, gb);
  r.fscore = fscore(ga, gb);
  return r;
}

EvalReport aggregate(std::span<const PartResult> results, const nlohmann::json& config) {
  if (results.empty()) throw InputError("nothing to aggregate");
  EvalReport report;
  report.config = config;
  report.parts = results.size();
  std::map<std::string, MetricRow> rows;
  MetricRow instance{"mean (instance)"};
  for (const PartResult& r : results) {
    MetricRow& row = rows[r.category];
    row.category = r.category;
    ++row.parts;
    ++instance.parts;
    if (!r.success) continue;
    ++row.successes;
    ++instance.successes;
    row.chamfer += r.chamfer;
    row.iou += r.iou;
    row.fscore += r.fscore;
    instance.chamfer += r.chamfer;
    instance.iou += r.iou;
    instance.fscore += r.fscore;
  }
  report.success_rate = static_cast<double>(instance.successes) / static_cast<double>(instance.parts);
  if (instance.successes == 0) return report;

  const auto finish = [](MetricRow& row) {
    const double n = static_cast<double>(row.successes);
    row.chamfer /= n;
    row.iou /= n;
    row.fscore /= n;
  };
  finish(instance);
  MetricRow category{"mean (category)"};
  category.parts = instance.parts;
  category.successes = instance.successes;
  std::size_t n_categories = 0;
  for (auto& [name, row] : rows) {
    if (row.successes == 0) continue;
    finish(row);
    category.chamfer += row.chamfer;
    category.iou += row.iou;
    category.fscore += row.fscore;
    ++n_categories;
    report.categories.push_back(row);
  }
  category.chamfer /= static_cast<double>(n_categories);
  category.iou /= static_cast<double>(n_categories);
  category.fscore /= static_cast<double>(n_categories);
  report.instance_mean = instance;
  report.category_mean = category;
  return report;
}

nlohmann::json to_json(const PartResult& r) {
  nlohmann::json j = {{"object_id", r.object_id}, {"part", r.part}, {"category", r.category}, {"success", r.success}};
  if (r.success) {
    j["chamfer"] = r.chamfer;
    j["iou"] = r.iou;
    j["fscore"] = r.fscore;
  }
  return j;
}

PartResult part_result_from_json(const nlohmann::json& j) {
  try {
    PartResult r;
    r.object_id = j.at("object_id").get<std::string>();
    r.part = j.at("part").get<int>();
    r.category = j.at("category").get<std::string>();
    r.success = j.at("success").get<bool>();
    if (r.success) {
      r.chamfer = j.at("chamfer").get<double>();
      r.iou = j.at("iou").get<double>();
      r.fscore = j.at("fscore").get<double>();
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad part result: ") + e.what());
  }
}

namespace {

nlohmann::json row_json(const MetricRow& row) {
  return {{"category", row.category}, {"parts", row.parts},  {"successes", row.successes},
          {"chamfer", row.chamfer},   {"iou", row.iou},      {"fscore", row.fscore}};
}

}  // namespace

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["config"] = report.config;
  j["parts"] = report.parts;
  j["success_rate"] = report.success_rate;
  j["categories"] = nlohmann::json::array();
  for (const MetricRow& row : report.categories) j["categories"].push_back(row_json(row));
  j["mean_instance"] = report.instance_mean ? row_json(*report.instance_mean) : nlohmann::json();
  j["mean_category"] = report.category_mean ? row_json(*report.category_mean) : nlohmann::json();
  return j;
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "# config " << report.config.dump() << "\n";
  std::vector<const MetricRow*> columns;
  for (const MetricRow& row : report.categories) columns.push_back(&row);
  if (report.instance_mean) columns.push_back(&*report.instance_mean);
  if (report.category_mean) columns.push_back(&*report.category_mean);
  out << "metric";
  for (const MetricRow* c : columns) out << "," << c->category;
  out << "\n";
  const auto line = [&](const char* name, double MetricRow::*field) {
    out << name;
    for (const MetricRow* c : columns) out << "," << fmt(c->*field);
    out << "\n";
  };
  line("chamfer", &MetricRow::chamfer);
  line("iou", &MetricRow::iou);
  line("fscore", &MetricRow::fscore);
  out << "success_rate," << fmt(report.success_rate) << "\n";
  return out.str();
}

std::string sweep_csv(std::span<const SweepColumn> columns, const nlohmann::json& config) {
  std::ostringstream out;
  out << "# config " << config.dump() << "\n";
  out << "metric";
  for (const SweepColumn& c : columns) out << ",S=" << c.scale;
  out << "\n";
  const auto line = [&](const char* name, double MetricRow::*field) {
    out << name;
    for (const SweepColumn& c : columns)
      out << "," << (c.report.instance_mean ? fmt((*c.report.instance_mean).*field) : std::string("nan"));
    out << "\n";
  };
  line("chamfer", &MetricRow::chamfer);
  line("iou", &MetricRow::iou);
  line("fscore", &MetricRow::fscore);
  out << "success_rate";
  for (const SweepColumn& c : columns) out << "," << fmt(c.report.success_rate);
  out << "\n";
  return out.str();
}

}  // namespace holopart::eval
