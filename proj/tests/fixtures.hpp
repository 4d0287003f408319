#pragma once

#include "holopart/curation.hpp"
#include "holopart/primitives.hpp"

#include <vector>

namespace fixtures {

using holopart::AABB;
using holopart::TriMesh;
using holopart::Vec3;

inline TriMesh box(Vec3 lo, Vec3 hi, double max_edge = 1e9) { return holopart::make_box({lo, hi}, max_edge); }

/// Top slab plus four legs whose upper ends sit inside the top.
inline std::vector<TriMesh> table(double max_edge = 1e9) {
  std::vector<TriMesh> parts{box(Vec3(-1.0, 0.0, -0.6), Vec3(1.0, 0.15, 0.6), max_edge)};
  for (double x : {-0.85, 0.7})
    for (double z : {-0.45, 0.3}) parts.push_back(box(Vec3(x, -1.0, z), Vec3(x + 0.15, 0.08, z + 0.15), max_edge));
  return parts;
}

inline std::vector<TriMesh> chair() {
  std::vector<TriMesh> parts = {box(Vec3(-0.5, 0.0, -0.5), Vec3(0.5, 0.1, 0.5)),
                                box(Vec3(-0.5, 0.05, 0.4), Vec3(0.5, 1.0, 0.5))};
  for (double x : {-0.5, 0.4})
    for (double z : {-0.5, 0.4}) parts.push_back(box(Vec3(x, -0.8, z), Vec3(x + 0.1, 0.05, z + 0.1)));
  return parts;
}

inline std::vector<TriMesh> lamp() {
  return {holopart::make_cylinder(Vec3(0, -1.0, 0), Vec3(0, -0.9, 0), 0.4, 24),
          holopart::make_cylinder(Vec3(0, -0.95, 0), Vec3(0, 0.6, 0), 0.05, 12),
          holopart::make_cylinder(Vec3(0, 0.5, 0), Vec3(0, 0.9, 0), 0.35, 24)};
}

/// Each part is a 3 x 3 grid of separated small cubes.
inline std::vector<TriMesh> fragmented() {
  std::vector<TriMesh> parts;
  for (int p = 0; p < 3; ++p) {
    std::vector<TriMesh> bits;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const Vec3 lo(0.5 * i, 0.5 * j, 0.6 * p + 0.15 * i);
        bits.push_back(box(lo, lo + Vec3(0.2, 0.2, 0.2)));
      }
    TriMesh m = holopart::merge_meshes(bits);
    m.labels.clear();
    parts.push_back(m);
  }
  return parts;
}

/// Unit cube with a 0.3 cube protruding above it: the big cube covers 1 / 1.09 of the
/// whole silhouette in both views.
inline std::vector<TriMesh> dominant() {
  return {box(Vec3(0, 0, 0), Vec3(1, 1, 1)), box(Vec3(0.35, 0.9, 0.35), Vec3(0.65, 1.3, 0.65))};
}

inline std::vector<TriMesh> single() { return {box(Vec3(0, 0, 0), Vec3(1, 2, 1))}; }

/// Six objects: table, chair, single part, fragmented, dominant, lamp.
inline std::vector<holopart::curation::RawObject> curation_corpus() {
  return {{"A_table", table()},   {"B_chair", chair()},       {"C_single", single()},
          {"D_fragmented", fragmented()}, {"E_dominant", dominant()}, {"F_lamp", lamp()}};
}

}  // namespace fixtures
