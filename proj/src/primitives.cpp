#include "holopart/primitives.hpp"

#include <cmath>
#include <map>
#include <numbers>

namespace holopart {

TriMesh make_box(const AABB& box, double max_edge) {
  const Vec3 ext = box.extent();
  if ((ext.array() <= 0.0).any()) throw InputError("box must have positive extent");
  std::array<int, 3> n{};
  for (int a = 0; a < 3; ++a) n[a] = std::max(1, static_cast<int>(std::ceil(ext[a] / max_edge - 1e-9)));

  TriMesh mesh;
  std::map<std::array<int, 3>, std::int32_t> ids;
  const auto vid = [&](std::array<int, 3> key) {
    auto [it, inserted] = ids.try_emplace(key, static_cast<std::int32_t>(mesh.vertices.size()));
    if (inserted) {
      Vec3 p;
      for (int a = 0; a < 3; ++a) p[a] = key[a] == n[a] ? box.max[a] : box.min[a] + ext[a] * key[a] / n[a];
      mesh.vertices.push_back(p);
    }
    return it->second;
  };
  // For each axis and side, lay a grid on the face; winding chosen so normals point outward.
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      for (int i = 0; i < n[u]; ++i) {
        for (int j = 0; j < n[v]; ++j) {
          std::array<int, 3> k00{}, k10{}, k11{}, k01{};
          for (auto* k : {&k00, &k10, &k11, &k01}) (*k)[axis] = side ? n[axis] : 0;
          k00[u] = i, k00[v] = j;
          k10[u] = i + 1, k10[v] = j;
          k11[u] = i + 1, k11[v] = j + 1;
          k01[u] = i, k01[v] = j + 1;
          const auto a = vid(k00), b = vid(k10), c = vid(k11), d = vid(k01);
          if (side) {
            mesh.faces.push_back({a, b, c});
            mesh.faces.push_back({a, c, d});
          } else {
            mesh.faces.push_back({a, c, b});
            mesh.faces.push_back({a, d, c});
          }
        }
      }
    }
  }
  return mesh;
}

TriMesh make_cylinder(const Vec3& a, const Vec3& b, double radius, int segments, double max_edge) {
  const Vec3 axis = b - a;
  const double length = axis.norm();
  if (!(length > 0.0) || !(radius > 0.0) || segments < 3) throw InputError("invalid cylinder");
  const Vec3 w = axis / length;
  const Vec3 helper = std::abs(w.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = w.cross(helper).normalized();
  const Vec3 v = w.cross(u);
  const int rings = std::max(1, static_cast<int>(std::ceil(length / max_edge - 1e-9)));
  const int caps = std::max(1, static_cast<int>(std::ceil(radius / max_edge - 1e-9)));

  TriMesh mesh;
  const auto ring_point = [&](double t, double r, int s) {
    const double phi = 2.0 * std::numbers::pi * s / segments;
    return Vec3(a + t * axis + r * (std::cos(phi) * u + std::sin(phi) * v));
  };
  // Side rings 0..rings; cap rings shrink toward the centers.
  std::vector<std::vector<std::int32_t>> side(rings + 1, std::vector<std::int32_t>(segments));
  for (int r = 0; r <= rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      side[r][s] = static_cast<std::int32_t>(mesh.vertices.size());
      mesh.vertices.push_back(ring_point(static_cast<double>(r) / rings, radius, s));
    }
  }
  for (int r = 0; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      const int s1 = (s + 1) % segments;
      mesh.faces.push_back({side[r][s], side[r][s1], side[r + 1][s1]});
      mesh.faces.push_back({side[r][s], side[r + 1][s1], side[r + 1][s]});
    }
  }
  for (int end = 0; end < 2; ++end) {
    const double t = end ? 1.0 : 0.0;
    std::vector<std::int32_t> outer = end ? side[rings] : side[0];
    for (int c = caps - 1; c >= 0; --c) {
      std::vector<std::int32_t> inner;
      if (c == 0) {
        inner.push_back(static_cast<std::int32_t>(mesh.vertices.size()));
        mesh.vertices.push_back(a + t * axis);
      } else {
        for (int s = 0; s < segments; ++s) {
          inner.push_back(static_cast<std::int32_t>(mesh.vertices.size()));
          mesh.vertices.push_back(ring_point(t, radius * c / caps, s));
        }
      }
      for (int s = 0; s < segments; ++s) {
        const int s1 = (s + 1) % segments;
        Face f1, f2{-1, -1, -1};
        if (inner.size() == 1) {
          f1 = {outer[s], inner[0], outer[s1]};
        } else {
          f1 = {outer[s], inner[s], inner[s1]};
          f2 = {outer[s], inner[s1], outer[s1]};
        }
        // Bottom cap faces -axis; top cap faces +axis.
        if (end) {
          std::swap(f1[1], f1[2]);
          std::swap(f2[1], f2[2]);
        }
        mesh.faces.push_back(f1);
        if (f2[0] >= 0) mesh.faces.push_back(f2);
      }
      outer = inner;
    }
  }
  return mesh;
}

TriMesh make_icosphere(const Vec3& center, double radius, int level) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                             {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& p : verts) p.normalize();
  std::vector<Face> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
                             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
                             {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, std::int32_t> mid;
    const auto midpoint = [&](std::int32_t i, std::int32_t j) {
      const auto key = std::minmax(i, j);
      auto [it, inserted] = mid.try_emplace(key, static_cast<std::int32_t>(verts.size()));
      if (inserted) verts.push_back((verts[i] + verts[j]).normalized());
      return it->second;
    };
    std::vector<Face> next;
    next.reserve(faces.size() * 4);
    for (const Face& f : faces) {
      const auto a = midpoint(f[0], f[1]), b = midpoint(f[1], f[2]), c = midpoint(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    faces = std::move(next);
  }
  TriMesh mesh;
  mesh.vertices.reserve(verts.size());
  for (const Vec3& p : verts) mesh.vertices.push_back(center + radius * p);
  mesh.faces = std::move(faces);
  return mesh;
}

std::vector<Vec3> icosphere_directions(int level) {
  return make_icosphere(Vec3::Zero(), 1.0, level).vertices;
}

TriMesh rigid_transformed(const TriMesh& mesh, const Eigen::Matrix3d& rotation, const Vec3& translation) {
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v = rotation * v + translation;
  return out;
}

}  // namespace holopart
