#pragma once

#include "holopart/geometry.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace holopart::field {

/// Dense scalar lattice. Sample (i, j, k) sits at the center of cell (i, j, k) of `domain`;
/// values are stored row-major with z fastest.
struct ScalarGrid {
  std::array<int, 3> resolution{0, 0, 0};
  AABB domain;
  std::vector<double> values;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * resolution[1] + j) * resolution[2] + k;
  }
  Vec3 cell_size() const;
  Vec3 sample_position(int i, int j, int k) const;
  std::size_t size() const { return values.size(); }
};

/// Binary occupancy lattice over an axis-aligned box.
struct OccGrid {
  std::array<int, 3> resolution{0, 0, 0};
  AABB domain;
  std::vector<std::uint8_t> values;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * resolution[1] + j) * resolution[2] + k;
  }
  std::size_t count() const;
};

/// Exact unsigned distance from every sample position to the mesh surface.
ScalarGrid compute_udf(const TriMesh& mesh, std::array<int, 3> resolution, const AABB& domain);

/// Isosurface at `iso`. Samples below `iso` are inside; triangles wind counter-clockwise
/// seen from the outside (normals point toward increasing values).
TriMesh marching_cubes(const ScalarGrid& grid, double iso);

/// Default watertighting offset, in units of the grid's largest cell edge.
inline constexpr double kDefaultShellOffsetCells = 1.5;

/// Closed proxy for a possibly open or non-manifold surface: the outer sheet of the
/// `offset`-isosurface of the UDF. Cells reachable from the grid boundary through
/// samples farther than `offset` are outside; everything else is solid.
struct WatertightOptions {
  int resolution = 128;               // samples along the longest axis
  double offset_cells = kDefaultShellOffsetCells;
  double margin_cells = 3.0;          // padding beyond the offset on each side
};
TriMesh watertight_proxy(const TriMesh& mesh, const WatertightOptions& options = {});

/// Batched occupancy oracle: one logit per query point.
using OccupancyFn = std::function<std::vector<double>(std::span<const Vec3>)>;

struct LocalExtraction {
  TriMesh mesh;
  AABB box;                    // the scaled extraction box
  bool boundary_open = false;  // occupancy reached the box faces; the surface is clipped there
};

inline constexpr double kDefaultPartBoxScale = 1.3;

/// Marching cubes at logit 0 restricted to `part_box` scaled by `scale` about its center.
/// Cells are cubic with `resolution` cells along the longest box axis. The lattice is padded
/// with an outside layer so clipped surfaces are closed by the box faces.
LocalExtraction local_marching_cubes(const OccupancyFn& occupancy, const AABB& part_box,
                                     double scale = kDefaultPartBoxScale, int resolution = 64,
                                     std::size_t batch = 8192);

struct Voxelization {
  OccGrid grid;
  std::size_t out_of_domain = 0;  // points clamped into the border cells
};

/// Cell is occupied iff at least one point falls in it. Points on the max face land in
/// the last cell.
Voxelization voxelize_points(std::span<const Vec3> points, int resolution, const AABB& domain);

/// Binary grid files: 8-byte magic "HPGRID01", int32 nx ny nz, float64 min[3] max[3],
/// uint8 dtype (0 = float64, 1 = uint8), then row-major values (z fastest). Little-endian.
void save_grid(const ScalarGrid& grid, const std::filesystem::path& path);
void save_grid(const OccGrid& grid, const std::filesystem::path& path);
ScalarGrid load_scalar_grid(const std::filesystem::path& path);
OccGrid load_occ_grid(const std::filesystem::path& path);

}  // namespace holopart::field
