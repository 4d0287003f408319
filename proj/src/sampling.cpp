#include "holopart/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace holopart::sampling {

SurfaceSamples sample_surface_tracked(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.empty()) throw InputError("cannot sample an empty mesh");
  if (n == 0) throw InputError("sample count must be positive");
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += face_area(mesh, f);
    cumulative[f] = total;
  }
  if (!(total > 0.0)) throw InputError("cannot sample a zero-area mesh");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  SurfaceSamples out;
  out.cloud.positions.reserve(n);
  out.cloud.normals.reserve(n);
  out.source_faces.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double r = uniform(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    if (it == cumulative.end()) --it;
    auto f = static_cast<std::size_t>(it - cumulative.begin());
    // Skip zero-area faces that share a cumulative value with their predecessor.
    while (face_area(mesh, f) == 0.0 && f + 1 < mesh.faces.size()) ++f;
    double u = uniform(rng), v = uniform(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const Face& t = mesh.faces[f];
    const Vec3& a = mesh.vertices[t[0]];
    out.cloud.positions.push_back(a + u * (mesh.vertices[t[1]] - a) + v * (mesh.vertices[t[2]] - a));
    out.cloud.normals.push_back(face_normal(mesh, f));
    out.source_faces.push_back(f);
  }
  return out;
}

PointCloud sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  return sample_surface_tracked(mesh, n, seed).cloud;
}

std::vector<std::size_t> fps(std::span<const Vec3> points, std::size_t m, std::uint64_t seed) {
  const std::size_t n = points.size();
  if (m > n) throw InputError("fps: requested more points than available");
  std::vector<std::size_t> selected;
  if (m == 0) return selected;
  selected.reserve(m);

  std::size_t first = 0;
  if (seed == 0) {
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : points) centroid += p;
    centroid /= static_cast<double>(n);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (points[i] - centroid).squaredNorm();
      if (d < best) {
        best = d;
        first = i;
      }
    }
  } else {
    std::mt19937_64 rng(seed);
    first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  }

  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::size_t current = first;
  for (std::size_t k = 0; k < m; ++k) {
    selected.push_back(current);
    min_dist[current] = -1.0;  // never chosen again
    std::size_t next = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (min_dist[i] < 0.0) continue;
      min_dist[i] = std::min(min_dist[i], (points[i] - points[current]).squaredNorm());
      if (min_dist[i] > best) {
        best = min_dist[i];
        next = i;
      }
    }
    current = next;
  }
  return selected;
}

PointCloud subset(const PointCloud& cloud, std::span<const std::size_t> indices) {
  PointCloud out;
  out.positions.reserve(indices.size());
  out.normals.reserve(indices.size());
  for (std::size_t i : indices) {
    out.positions.push_back(cloud.positions.at(i));
    out.normals.push_back(cloud.normals.at(i));
  }
  return out;
}

FeaturedPoints featured(const PointCloud& cloud) {
  return {cloud.positions, cloud.normals, std::nullopt};
}

FeaturedPoints build_masked_whole(const PointCloud& whole_points, std::span<const std::uint8_t> mask) {
  if (mask.size() != whole_points.size()) throw InputError("mask length does not match point count");
  FeaturedPoints out = featured(whole_points);
  std::vector<double> extra(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) extra[i] = mask[i] ? 1.0 : 0.0;
  out.extra = std::move(extra);
  return out;
}

std::vector<std::uint8_t> mask_from_faces(const TriMesh& mesh, std::span<const std::size_t> source_faces,
                                          int label) {
  if (!mesh.has_labels()) throw InputError("mesh carries no part labels");
  std::vector<std::uint8_t> mask(source_faces.size());
  for (std::size_t i = 0; i < source_faces.size(); ++i) {
    mask[i] = mesh.labels.at(source_faces[i]) == label ? 1 : 0;
  }
  return mask;
}

LocalFrame part_in_local_frame(const PointCloud& part_points) {
  if (part_points.size() == 0) throw InputError("part_in_local_frame on an empty cloud");
  const NormTransform t = unit_transform(bounding_box(std::span<const Vec3>(part_points.positions)));
  return {transformed(part_points, t), t};
}

}  // namespace holopart::sampling
