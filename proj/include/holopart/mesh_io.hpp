#pragma once

#include "holopart/geometry.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace holopart {

struct LoadedMesh {
  TriMesh mesh;
  std::size_t dropped_faces = 0;  // degenerate faces removed on load
};

/// Reads ASCII OBJ or ASCII/binary PLY, chosen by file extension. Polygons are
/// fan-triangulated; faces with repeated indices are dropped and counted.
/// A per-face integer property named `part` (PLY) is read into labels.
LoadedMesh load_mesh(const std::filesystem::path& path);

/// Writes ASCII OBJ or binary little-endian PLY by extension. PLY output carries
/// labels as an `int part` face property when present. `comments` become header comment lines.
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path, std::span<const std::string> comments = {});

/// Point cloud as PLY with normals and, optionally, a `uchar mask` property.
void save_points(const PointCloud& cloud, const std::filesystem::path& path,
                 const std::vector<std::uint8_t>* mask = nullptr);

struct LoadedPoints {
  PointCloud cloud;
  std::vector<std::uint8_t> mask;  // empty when the file has none
};
LoadedPoints load_points(const std::filesystem::path& path);

}  // namespace holopart
