#pragma once

#include "holopart/common.hpp"

#include <span>
#include <vector>

namespace holopart {

/// Indexed triangle surface with an optional part label per face.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<int> labels;  // empty, or one entry per face

  bool empty() const { return faces.empty(); }
  bool has_labels() const { return !labels.empty(); }
};

/// Oriented surface samples.
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;

  std::size_t size() const { return positions.size(); }
};

struct AABB {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  double volume() const {
    const Vec3 e = extent();
    return e.x() * e.y() * e.z();
  }
  bool contains(const Vec3& p, double tol = 0.0) const {
    return (p.array() >= min.array() - tol).all() && (p.array() <= max.array() + tol).all();
  }
  bool contains(const AABB& box, double tol = 0.0) const {
    return contains(box.min, tol) && contains(box.max, tol);
  }
  AABB scaled(double factor) const {
    const Vec3 c = center();
    const Vec3 h = 0.5 * factor * extent();
    return {c - h, c + h};
  }
  AABB padded(double margin) const {
    const Vec3 m = Vec3::Constant(margin);
    return {min - m, max + m};
  }
  void expand(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
};

/// Uniform scale plus translation: normalized = scale * p + translation.
struct NormTransform {
  double scale = 1.0;
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * p + translation; }
  Vec3 invert(const Vec3& q) const { return (q - translation) / scale; }
  NormTransform inverse() const { return {1.0 / scale, -translation / scale}; }
};

/// Throws InputError if a mesh violates the TriMesh invariants.
void validate(const TriMesh& mesh);

/// Triangle helpers.
Vec3 face_normal(const TriMesh& mesh, std::size_t f);  // unit, or zero when degenerate
double face_area(const TriMesh& mesh, std::size_t f);
Vec3 face_centroid(const TriMesh& mesh, std::size_t f);
double surface_area(const TriMesh& mesh);

AABB bounding_box(const TriMesh& mesh);
AABB bounding_box(std::span<const Vec3> points);

struct NormalizedMesh {
  TriMesh mesh;
  NormTransform transform;
};

/// Centers on the AABB center and scales the longest axis to span [-1, 1].
NormalizedMesh normalize_to_unit(const TriMesh& mesh);
NormTransform unit_transform(const AABB& box);

TriMesh transformed(const TriMesh& mesh, const NormTransform& t);
PointCloud transformed(const PointCloud& cloud, const NormTransform& t);

/// Concatenates parts; each output face is labeled with its source part index.
TriMesh merge_meshes(std::span<const TriMesh> parts);

/// Keeps the listed faces and compacts the vertex array.
TriMesh submesh(const TriMesh& mesh, std::span<const std::size_t> faces);

/// Faces carrying `label` (requires labels).
TriMesh faces_with_label(const TriMesh& mesh, int label);

/// Number of undirected edges not shared by exactly two faces.
std::size_t count_boundary_or_nonmanifold_edges(const TriMesh& mesh);
/// True if every undirected edge borders exactly two faces.
bool is_edge_manifold_closed(const TriMesh& mesh);

}  // namespace holopart
