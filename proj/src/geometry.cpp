#include "holopart/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace holopart {

void validate(const TriMesh& mesh) {
  const auto n = static_cast<std::int64_t>(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) {
    if (!v.allFinite()) throw InputError("non-finite vertex coordinate");
  }
  for (const Face& f : mesh.faces) {
    for (auto i : f) {
      if (i < 0 || i >= n) throw InputError("face index out of range");
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) throw InputError("degenerate face");
  }
  if (!mesh.labels.empty() && mesh.labels.size() != mesh.faces.size()) {
    throw InputError("label count does not match face count");
  }
}

Vec3 face_normal(const TriMesh& mesh, std::size_t f) {
  const Face& t = mesh.faces[f];
  const Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
  const double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

double face_area(const TriMesh& mesh, std::size_t f) {
  const Face& t = mesh.faces[f];
  return 0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]).norm();
}

Vec3 face_centroid(const TriMesh& mesh, std::size_t f) {
  const Face& t = mesh.faces[f];
  return (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
}

double surface_area(const TriMesh& mesh) {
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) total += face_area(mesh, f);
  return total;
}

AABB bounding_box(std::span<const Vec3> points) {
  if (points.empty()) throw InputError("bounding box of an empty point set");
  AABB box{points.front(), points.front()};
  for (const Vec3& p : points) box.expand(p);
  return box;
}

AABB bounding_box(const TriMesh& mesh) {
  if (mesh.vertices.empty()) throw InputError("bounding box of an empty mesh");
  return bounding_box(std::span<const Vec3>(mesh.vertices));
}

NormTransform unit_transform(const AABB& box) {
  const double longest = box.extent().maxCoeff();
  if (!(longest > 0.0)) throw InputError("zero-extent geometry cannot be normalized");
  const double s = 2.0 / longest;
  return {s, -s * box.center()};
}

NormalizedMesh normalize_to_unit(const TriMesh& mesh) {
  if (mesh.vertices.empty()) throw InputError("cannot normalize an empty mesh");
  const NormTransform t = unit_transform(bounding_box(mesh));
  return {transformed(mesh, t), t};
}

TriMesh transformed(const TriMesh& mesh, const NormTransform& t) {
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v = t.apply(v);
  return out;
}

PointCloud transformed(const PointCloud& cloud, const NormTransform& t) {
  PointCloud out = cloud;
  for (Vec3& p : out.positions) p = t.apply(p);
  return out;
}

TriMesh merge_meshes(std::span<const TriMesh> parts) {
  if (parts.empty()) throw InputError("merge_meshes needs at least one part");
  TriMesh out;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto offset = static_cast<std::int32_t>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), parts[k].vertices.begin(), parts[k].vertices.end());
    for (const Face& f : parts[k].faces) {
      out.faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
      out.labels.push_back(static_cast<int>(k));
    }
  }
  return out;
}

TriMesh submesh(const TriMesh& mesh, std::span<const std::size_t> faces) {
  TriMesh out;
  std::vector<std::int32_t> remap(mesh.vertices.size(), -1);
  for (std::size_t f : faces) {
    Face nf{};
    for (int c = 0; c < 3; ++c) {
      const auto v = mesh.faces[f][c];
      if (remap[v] < 0) {
        remap[v] = static_cast<std::int32_t>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[v]);
      }
      nf[c] = remap[v];
    }
    out.faces.push_back(nf);
    if (mesh.has_labels()) out.labels.push_back(mesh.labels[f]);
  }
  return out;
}

TriMesh faces_with_label(const TriMesh& mesh, int label) {
  if (!mesh.has_labels()) throw InputError("mesh carries no part labels");
  std::vector<std::size_t> keep;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    if (mesh.labels[f] == label) keep.push_back(f);
  }
  return submesh(mesh, keep);
}

std::size_t count_boundary_or_nonmanifold_edges(const TriMesh& mesh) {
  std::unordered_map<std::uint64_t, int> uses;
  uses.reserve(mesh.faces.size() * 3);
  for (const Face& f : mesh.faces) {
    for (int c = 0; c < 3; ++c) {
      auto a = static_cast<std::uint64_t>(f[c]);
      auto b = static_cast<std::uint64_t>(f[(c + 1) % 3]);
      if (a > b) std::swap(a, b);
      ++uses[(a << 32) | b];
    }
  }
  return static_cast<std::size_t>(
      std::count_if(uses.begin(), uses.end(), [](const auto& kv) { return kv.second != 2; }));
}

bool is_edge_manifold_closed(const TriMesh& mesh) {
  return !mesh.faces.empty() && count_boundary_or_nonmanifold_edges(mesh) == 0;
}

}  // namespace holopart
