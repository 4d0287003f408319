#pragma once

#include "holopart/geometry.hpp"

#include <optional>
#include <vector>

namespace holopart::sampling {

/// Point set carrying an optional per-point binary channel (the part mask).
struct FeaturedPoints {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  std::optional<std::vector<double>> extra;

  std::size_t size() const { return positions.size(); }
};

struct SurfaceSamples {
  PointCloud cloud;
  std::vector<std::size_t> source_faces;  // face each sample was drawn from
};

/// Area-weighted uniform surface samples with face normals. Deterministic given `seed`.
SurfaceSamples sample_surface_tracked(const TriMesh& mesh, std::size_t n, std::uint64_t seed);
PointCloud sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed);

/// Greedy farthest point sampling. Seed 0 starts at the point nearest the centroid,
/// any other seed at a seeded uniform index. Ties go to the lowest index.
std::vector<std::size_t> fps(std::span<const Vec3> points, std::size_t m, std::uint64_t seed);
inline std::vector<std::size_t> fps(const PointCloud& points, std::size_t m, std::uint64_t seed) {
  return fps(std::span<const Vec3>(points.positions), m, seed);
}

PointCloud subset(const PointCloud& cloud, std::span<const std::size_t> indices);

/// Whole-shape points with the mask attached as the extra channel.
FeaturedPoints build_masked_whole(const PointCloud& whole_points, std::span<const std::uint8_t> mask);

/// Per-sample mask: 1 where the source face carries `label`.
std::vector<std::uint8_t> mask_from_faces(const TriMesh& mesh, std::span<const std::size_t> source_faces,
                                          int label);

struct LocalFrame {
  PointCloud points;
  NormTransform transform;  // whole frame -> local [-1, 1] frame
};

/// Renormalizes a part's samples to their own [-1, 1] box.
LocalFrame part_in_local_frame(const PointCloud& part_points);

FeaturedPoints featured(const PointCloud& cloud);

}  // namespace holopart::sampling
