#pragma once

#include "holopart/field.hpp"
#include "holopart/geometry.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace holopart::eval {

/// Symmetric L1 Chamfer distance: half the sum of both mean nearest-neighbour distances.
/// Exact (kd-tree). Throws InputError on an empty cloud.
double chamfer_l1(std::span<const Vec3> a, std::span<const Vec3> b);

/// |A and B| / |A or B|; 1 when both grids are empty. Throws InputError on a resolution or
/// domain mismatch.
double iou(const field::OccGrid& a, const field::OccGrid& b);

/// Harmonic mean of voxel precision and recall of `pred` against `gt`.
double fscore(const field::OccGrid& pred, const field::OccGrid& gt);

inline constexpr std::size_t kMinSuccessFaces = 10;

/// Nonempty, at least kMinSuccessFaces faces, no edge shared by more than two faces, and every
/// vertex inside `box` (when given).
bool success(const TriMesh& mesh, const std::optional<AABB>& box = std::nullopt);
bool success(const std::optional<TriMesh>& mesh, const std::optional<AABB>& box = std::nullopt);

/// Solid occupancy at the cell centers of a res^3 lattice over `domain`: cell set where the
/// logit is positive.
field::OccGrid occupancy_grid(const field::OccupancyFn& occupancy, int resolution, const AABB& domain);

/// Occupancy logits (+1 inside, -1 outside) of a closed mesh by ray parity.
field::OccupancyFn mesh_occupancy(const TriMesh& closed);

struct EvalOptions {
  std::size_t n_points = 50000;  // surface samples per mesh for Chamfer and voxelization
  int voxel_res = 64;
  AABB domain{Vec3(-1, -1, -1), Vec3(1, 1, 1)};  // shared voxel domain, the whole-shape frame
  std::uint64_t seed = 0;
};

struct PartResult {
  std::string object_id;
  int part = 0;
  std::string category;
  bool success = false;
  double chamfer = 0.0;  // metrics only meaningful when success
  double iou = 0.0;
  double fscore = 0.0;
};

/// Metrics of one predicted part. An empty prediction yields success = false.
PartResult evaluate_part(const TriMesh& pred, const TriMesh& gt, const EvalOptions& options);

struct MetricRow {
  std::string category;  // "mean (instance)" / "mean (category)" for the summary rows
  std::size_t parts = 0;
  std::size_t successes = 0;
  double chamfer = 0.0;
  double iou = 0.0;
  double fscore = 0.0;
};

struct EvalReport {
  std::vector<MetricRow> categories;  // sorted by name; only categories with a success
  std::optional<MetricRow> instance_mean;
  std::optional<MetricRow> category_mean;
  std::size_t parts = 0;
  double success_rate = 0.0;
  nlohmann::json config;  // echo of the evaluation settings
};

/// Means over successful parts. Throws InputError on an empty list.
EvalReport aggregate(std::span<const PartResult> results, const nlohmann::json& config = {});

nlohmann::json to_json(const PartResult& r);
PartResult part_result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvalReport& report);

/// Metric x category table with a config echo comment line on top.
std::string report_csv(const EvalReport& report);

struct SweepColumn {
  double scale = 0.0;
  EvalReport report;
};

/// One row per metric (Chamfer, IoU, F-Score, success), one column per guidance scale, with
/// the instance means.
std::string sweep_csv(std::span<const SweepColumn> columns, const nlohmann::json& config);

}  // namespace holopart::eval
