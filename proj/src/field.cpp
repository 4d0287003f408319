#include "holopart/field.hpp"

#include "holopart/spatial.hpp"
#include "mc_tables.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <limits>

namespace holopart::field {

Vec3 ScalarGrid::cell_size() const {
  return domain.extent().cwiseQuotient(Vec3(resolution[0], resolution[1], resolution[2]));
}

Vec3 ScalarGrid::sample_position(int i, int j, int k) const {
  return domain.min + (Vec3(i, j, k) + Vec3::Constant(0.5)).cwiseProduct(cell_size());
}

std::size_t OccGrid::count() const {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
}

ScalarGrid compute_udf(const TriMesh& mesh, std::array<int, 3> resolution, const AABB& domain) {
  if (mesh.empty()) throw InputError("compute_udf on an empty mesh");
  for (int r : resolution) {
    if (r <= 0) throw InputError("grid resolution must be positive");
  }
  if (!domain.contains(bounding_box(mesh), 1e-12)) throw InputError("UDF domain does not contain the mesh");
  ScalarGrid grid;
  grid.resolution = resolution;
  grid.domain = domain;
  grid.values.assign(static_cast<std::size_t>(resolution[0]) * resolution[1] * resolution[2], 0.0);
  const TriangleBvh bvh(mesh);
  const double step = grid.cell_size()[2];
  for (int i = 0; i < resolution[0]; ++i) {
    for (int j = 0; j < resolution[1]; ++j) {
      double previous = std::numeric_limits<double>::infinity();
      for (int k = 0; k < resolution[2]; ++k) {
        // Lipschitz bound from the previous sample prunes the search without changing the result.
        const double bound = previous + step;
        const double bound_sq = std::isfinite(bound) ? bound * bound * (1.0 + 1e-9) + 1e-300
                                                     : std::numeric_limits<double>::infinity();
        ClosestHit hit = bvh.closest(grid.sample_position(i, j, k), bound_sq);
        if (!std::isfinite(hit.distance_sq)) hit = bvh.closest(grid.sample_position(i, j, k));
        previous = hit.distance();
        grid.values[grid.index(i, j, k)] = previous;
      }
    }
  }
  return grid;
}

namespace {

// Corner offsets matching the case table's vertex numbering.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
// Each cube edge as (origin corner, axis); edges run from origin along +axis.
constexpr int kEdge[12][2] = {{0, 0}, {1, 1}, {3, 0}, {0, 1}, {4, 0}, {5, 1},
                              {7, 0}, {4, 1}, {0, 2}, {1, 2}, {2, 2}, {3, 2}};

// Generic extraction over a lattice of nx*ny*nz samples with positions from `position`.
template <typename PositionFn>
TriMesh extract(std::array<int, 3> n, const std::vector<double>& values, double iso, PositionFn position) {
  TriMesh mesh;
  const auto node = [&](int i, int j, int k) {
    return (static_cast<std::size_t>(i) * n[1] + j) * n[2] + k;
  };
  const std::size_t count = static_cast<std::size_t>(n[0]) * n[1] * n[2];
  std::array<std::vector<std::int32_t>, 3> edge_vertex;
  for (auto& v : edge_vertex) v.assign(count, -1);

  const auto vertex_on_edge = [&](int i, int j, int k, int axis) {
    const std::size_t a = node(i, j, k);
    std::int32_t& slot = edge_vertex[axis][a];
    if (slot >= 0) return slot;
    int i2 = i, j2 = j, k2 = k;
    (axis == 0 ? i2 : axis == 1 ? j2 : k2) += 1;
    const std::size_t b = node(i2, j2, k2);
    const double va = values[a], vb = values[b];
    const double t = va == vb ? 0.5 : std::clamp((iso - va) / (vb - va), 0.0, 1.0);
    const Vec3 pa = position(i, j, k), pb = position(i2, j2, k2);
    slot = static_cast<std::int32_t>(mesh.vertices.size());
    mesh.vertices.push_back(pa + t * (pb - pa));
    return slot;
  };

  for (int i = 0; i + 1 < n[0]; ++i) {
    for (int j = 0; j + 1 < n[1]; ++j) {
      for (int k = 0; k + 1 < n[2]; ++k) {
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          if (values[node(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2])] < iso) cube |= 1 << c;
        }
        if (detail::kMcEdgeTable[cube] == 0) continue;
        std::int32_t verts[12];
        for (int e = 0; e < 12; ++e) {
          if (detail::kMcEdgeTable[cube] & (1 << e)) {
            const int* o = kCorner[kEdge[e][0]];
            verts[e] = vertex_on_edge(i + o[0], j + o[1], k + o[2], kEdge[e][1]);
          }
        }
        for (int t = 0; detail::kMcTriTable[cube][t] >= 0; t += 3) {
          // The table winds clockwise seen from the outside under this corner layout.
          mesh.faces.push_back({verts[detail::kMcTriTable[cube][t]], verts[detail::kMcTriTable[cube][t + 2]],
                                verts[detail::kMcTriTable[cube][t + 1]]});
        }
      }
    }
  }
  return mesh;
}

}  // namespace

TriMesh marching_cubes(const ScalarGrid& grid, double iso) {
  if (grid.values.empty()) throw InputError("marching_cubes on an empty grid");
  const auto [lo, hi] = std::minmax_element(grid.values.begin(), grid.values.end());
  if (iso < *lo || iso > *hi) throw GeometryError("iso level outside the grid value range");
  TriMesh mesh = extract(grid.resolution, grid.values, iso,
                         [&](int i, int j, int k) { return grid.sample_position(i, j, k); });
  if (mesh.empty()) throw GeometryError("isosurface is empty");
  return mesh;
}

TriMesh watertight_proxy(const TriMesh& mesh, const WatertightOptions& options) {
  if (mesh.empty()) throw InputError("watertight_proxy on an empty mesh");
  if (options.resolution < 4) throw InputError("watertight resolution too small");
  const AABB box = bounding_box(mesh);
  const double longest = std::max(box.extent().maxCoeff(), 1e-9);
  // Cubic cells: the padded longest axis spans `resolution` cells.
  const double pad_cells = options.offset_cells + options.margin_cells;
  const double cell = longest / (options.resolution - 2.0 * pad_cells);
  if (!(cell > 0.0)) throw InputError("watertight margin exceeds the resolution");
  std::array<int, 3> res{};
  AABB domain;
  for (int a = 0; a < 3; ++a) {
    res[a] = std::max(4, static_cast<int>(std::ceil(box.extent()[a] / cell + 2.0 * pad_cells)));
    const double half = 0.5 * res[a] * cell;
    domain.min[a] = box.center()[a] - half;
    domain.max[a] = box.center()[a] + half;
  }
  ScalarGrid udf = compute_udf(mesh, res, domain);
  const double tau = options.offset_cells * cell;

  // Exterior flood fill over samples farther than tau (6-connectivity).
  std::vector<std::uint8_t> outside(udf.size(), 0);
  std::deque<std::array<int, 3>> queue;
  const auto seed = [&](int i, int j, int k) {
    const std::size_t id = udf.index(i, j, k);
    if (!outside[id] && udf.values[id] > tau) {
      outside[id] = 1;
      queue.push_back({i, j, k});
    }
  };
  for (int i = 0; i < res[0]; ++i) {
    for (int j = 0; j < res[1]; ++j) {
      for (int k = 0; k < res[2]; ++k) {
        if (i == 0 || j == 0 || k == 0 || i == res[0] - 1 || j == res[1] - 1 || k == res[2] - 1) seed(i, j, k);
      }
    }
  }
  while (!queue.empty()) {
    const auto [i, j, k] = queue.front();
    queue.pop_front();
    if (i > 0) seed(i - 1, j, k);
    if (j > 0) seed(i, j - 1, k);
    if (k > 0) seed(i, j, k - 1);
    if (i + 1 < res[0]) seed(i + 1, j, k);
    if (j + 1 < res[1]) seed(i, j + 1, k);
    if (k + 1 < res[2]) seed(i, j, k + 1);
  }
  ScalarGrid sided = udf;
  for (std::size_t id = 0; id < sided.size(); ++id) {
    const double d = udf.values[id] - tau;
    sided.values[id] = outside[id] ? d : -std::max(std::abs(d), 1e-12);
  }
  return marching_cubes(sided, 0.0);
}

LocalExtraction local_marching_cubes(const OccupancyFn& occupancy, const AABB& part_box, double scale,
                                     int resolution, std::size_t batch) {
  if (!(scale > 0.0)) throw InputError("extraction scale must be positive");
  if (resolution < 2) throw InputError("extraction resolution must be at least 2");
  const AABB box = part_box.scaled(scale);
  const double longest = box.extent().maxCoeff();
  if (!(longest > 0.0)) throw InputError("part box is empty");
  const double cell = longest / resolution;
  // Lattice nodes span the box; one extra padding layer on each side is forced outside.
  std::array<int, 3> inner{};
  Vec3 origin;
  for (int a = 0; a < 3; ++a) {
    inner[a] = std::max(2, static_cast<int>(std::ceil(box.extent()[a] / cell - 1e-9)) + 1);
    const double span = (inner[a] - 1) * cell;
    origin[a] = box.center()[a] - 0.5 * span;
  }
  const std::array<int, 3> n{inner[0] + 2, inner[1] + 2, inner[2] + 2};
  const auto position = [&](int i, int j, int k) { return Vec3(origin + cell * Vec3(i - 1, j - 1, k - 1)); };

  std::vector<Vec3> queries;
  queries.reserve(static_cast<std::size_t>(inner[0]) * inner[1] * inner[2]);
  for (int i = 0; i < inner[0]; ++i)
    for (int j = 0; j < inner[1]; ++j)
      for (int k = 0; k < inner[2]; ++k) queries.push_back(position(i + 1, j + 1, k + 1));
  std::vector<double> logits;
  logits.reserve(queries.size());
  for (std::size_t start = 0; start < queries.size(); start += batch) {
    const std::size_t len = std::min(batch, queries.size() - start);
    std::vector<double> part = occupancy(std::span<const Vec3>(queries).subspan(start, len));
    if (part.size() != len) throw Error("occupancy function returned the wrong number of logits");
    logits.insert(logits.end(), part.begin(), part.end());
  }

  // Extraction runs on the negated logit so that "inside" (logit > 0) is below the iso level.
  constexpr double kOutside = 1.0;
  std::vector<double> values(static_cast<std::size_t>(n[0]) * n[1] * n[2], kOutside);
  LocalExtraction out;
  out.box = box;
  bool any_inside = false;
  std::size_t q = 0;
  for (int i = 0; i < inner[0]; ++i) {
    for (int j = 0; j < inner[1]; ++j) {
      for (int k = 0; k < inner[2]; ++k, ++q) {
        const double logit = logits[q];
        if (!std::isfinite(logit)) throw NumericError("non-finite occupancy logit");
        const bool inside = logit > 0.0;
        any_inside |= inside;
        if (inside && (i == 0 || j == 0 || k == 0 || i == inner[0] - 1 || j == inner[1] - 1 || k == inner[2] - 1)) {
          out.boundary_open = true;
        }
        values[(static_cast<std::size_t>(i + 1) * n[1] + (j + 1)) * n[2] + (k + 1)] = -logit;
      }
    }
  }
  if (!any_inside) throw GeometryError("no occupancy sign crossing inside the extraction box");
  out.mesh = extract(n, values, 0.0, position);
  // Padding samples sit one cell outside the box; pull clipped vertices back onto the box faces.
  for (Vec3& v : out.mesh.vertices) v = v.cwiseMax(box.min).cwiseMin(box.max);
  if (out.mesh.empty()) throw GeometryError("no occupancy sign crossing inside the extraction box");
  return out;
}

Voxelization voxelize_points(std::span<const Vec3> points, int resolution, const AABB& domain) {
  if (points.empty()) throw InputError("voxelize_points needs at least one point");
  if (resolution <= 0) throw InputError("voxel resolution must be positive");
  Voxelization out;
  out.grid.resolution = {resolution, resolution, resolution};
  out.grid.domain = domain;
  out.grid.values.assign(static_cast<std::size_t>(resolution) * resolution * resolution, 0);
  const Vec3 size = domain.extent();
  for (const Vec3& p : points) {
    int idx[3];
    bool clamped = false;
    for (int a = 0; a < 3; ++a) {
      const double u = (p[a] - domain.min[a]) / size[a] * resolution;
      if (p[a] < domain.min[a] || p[a] > domain.max[a] || !std::isfinite(u)) clamped = true;
      const double f = std::isfinite(u) ? std::floor(u) : 0.0;
      idx[a] = static_cast<int>(std::clamp(f, 0.0, static_cast<double>(resolution - 1)));
    }
    if (clamped) ++out.out_of_domain;
    out.grid.values[out.grid.index(idx[0], idx[1], idx[2])] = 1;
  }
  return out;
}

namespace {

constexpr char kGridMagic[8] = {'H', 'P', 'G', 'R', 'I', 'D', '0', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "binary writers assume a little-endian host");
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw InputError("truncated grid file");
  return v;
}

void write_header(std::ostream& out, const std::array<int, 3>& res, const AABB& domain, std::uint8_t dtype) {
  out.write(kGridMagic, 8);
  for (int r : res) put<std::int32_t>(out, r);
  for (int a = 0; a < 3; ++a) put<double>(out, domain.min[a]);
  for (int a = 0; a < 3; ++a) put<double>(out, domain.max[a]);
  put<std::uint8_t>(out, dtype);
}

std::uint8_t read_header(std::istream& in, std::array<int, 3>& res, AABB& domain) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kGridMagic, 8) != 0) throw InputError("not a grid file");
  for (int& r : res) {
    r = get<std::int32_t>(in);
    if (r <= 0) throw InputError("invalid grid resolution");
  }
  for (int a = 0; a < 3; ++a) domain.min[a] = get<double>(in);
  for (int a = 0; a < 3; ++a) domain.max[a] = get<double>(in);
  return get<std::uint8_t>(in);
}

}  // namespace

void save_grid(const ScalarGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  write_header(out, grid.resolution, grid.domain, 0);
  for (double v : grid.values) put<double>(out, v);
}

void save_grid(const OccGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  write_header(out, grid.resolution, grid.domain, 1);
  out.write(reinterpret_cast<const char*>(grid.values.data()), static_cast<std::streamsize>(grid.values.size()));
}

ScalarGrid load_scalar_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  ScalarGrid grid;
  if (read_header(in, grid.resolution, grid.domain) != 0) throw InputError("grid file is not float64");
  grid.values.resize(static_cast<std::size_t>(grid.resolution[0]) * grid.resolution[1] * grid.resolution[2]);
  for (double& v : grid.values) v = get<double>(in);
  return grid;
}

OccGrid load_occ_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  OccGrid grid;
  if (read_header(in, grid.resolution, grid.domain) != 1) throw InputError("grid file is not uint8");
  grid.values.resize(static_cast<std::size_t>(grid.resolution[0]) * grid.resolution[1] * grid.resolution[2]);
  if (!in.read(reinterpret_cast<char*>(grid.values.data()), static_cast<std::streamsize>(grid.values.size()))) {
    throw InputError("truncated grid file");
  }
  return grid;
}

}  // namespace holopart::field
