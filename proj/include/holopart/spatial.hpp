#pragma once

#include "holopart/geometry.hpp"

#include <limits>
#include <span>
#include <vector>

namespace holopart {

/// Closest point on triangle (a, b, c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct ClosestHit {
  double distance_sq = std::numeric_limits<double>::infinity();
  std::size_t face = 0;
  Vec3 point = Vec3::Zero();

  double distance() const;
};

/// Bounding volume hierarchy over the faces of a mesh. The mesh must outlive it.
class TriangleBvh {
 public:
  explicit TriangleBvh(const TriMesh& mesh);

  /// Exact nearest surface point; ties resolve to the lowest face index.
  ClosestHit closest(const Vec3& p) const;
  ClosestHit closest(const Vec3& p, double max_distance_sq) const;

  /// Distance along `dir` to the first hit with t > t_min, or +inf.
  double first_hit(const Vec3& origin, const Vec3& dir, double t_min = 0.0, std::size_t* face = nullptr) const;
  /// Number of surface crossings along the ray (t > 0).
  std::size_t crossings(const Vec3& origin, const Vec3& dir) const;

  const TriMesh& mesh() const { return mesh_; }

 private:
  struct Node {
    AABB box;
    std::uint32_t left = 0, right = 0;  // children of interior nodes
    std::uint32_t first = 0, count = 0;  // primitive range of leaves; count 0 for interior nodes
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids);
  template <typename Visit>
  void ray_walk(const Vec3& origin, const Vec3& dir, double t_max, Visit&& visit) const;

  const TriMesh& mesh_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
};

/// Inside/outside test for closed meshes by majority vote of three ray parities.
class InsideTester {
 public:
  explicit InsideTester(const TriMesh& mesh) : bvh_(mesh) {}
  bool inside(const Vec3& p) const;

 private:
  TriangleBvh bvh_;
};

/// Static 3D kd-tree over a point set for exact nearest-neighbour queries.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points);

  struct Result {
    std::size_t index = 0;
    double distance_sq = std::numeric_limits<double>::infinity();
  };
  Result nearest(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;
    std::uint32_t left = 0, right = 0;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
  };
  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::uint32_t node, const Vec3& q, Result& best) const;

  std::vector<Vec3> points_;  // reordered copy
  std::vector<std::uint32_t> index_;
  std::vector<Node> nodes_;
};

}  // namespace holopart
