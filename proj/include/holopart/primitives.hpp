#pragma once

#include "holopart/geometry.hpp"

#include <Eigen/Geometry>

namespace holopart {

/// Closed axis-aligned box; faces are subdivided so no edge exceeds `max_edge`.
TriMesh make_box(const AABB& box, double max_edge = 1e9);

/// Closed capped cylinder between `a` and `b`.
TriMesh make_cylinder(const Vec3& a, const Vec3& b, double radius, int segments = 24, double max_edge = 1e9);

/// Subdivided icosahedron; level 0 has 12 vertices, level 2 has 162.
TriMesh make_icosphere(const Vec3& center, double radius, int level);

/// Unit directions at the vertices of a level-`level` icosphere.
std::vector<Vec3> icosphere_directions(int level);

TriMesh rigid_transformed(const TriMesh& mesh, const Eigen::Matrix3d& rotation, const Vec3& translation);

}  // namespace holopart
