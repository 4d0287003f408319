#include "holopart/mesh_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace holopart {
namespace {

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

// Appends a triangle fan, dropping faces with repeated indices.
void add_polygon(TriMesh& mesh, std::vector<int>* labels, const std::vector<std::int64_t>& poly, int label,
                 std::size_t& dropped) {
  const auto nv = static_cast<std::int64_t>(mesh.vertices.size());
  for (auto i : poly) {
    if (i < 0 || i >= nv) throw InputError("face index out of range");
  }
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
    const Face f{static_cast<std::int32_t>(poly[0]), static_cast<std::int32_t>(poly[k]),
                 static_cast<std::int32_t>(poly[k + 1])};
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
      ++dropped;
      continue;
    }
    mesh.faces.push_back(f);
    if (labels) labels->push_back(label);
  }
}

LoadedMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  LoadedMesh out;
  std::string line;
  std::vector<std::int64_t> poly;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v.x() >> v.y() >> v.z())) throw InputError("malformed vertex line in " + path.string());
      if (!v.allFinite()) throw InputError("non-finite vertex in " + path.string());
      out.mesh.vertices.push_back(v);
    } else if (tag == "f") {
      poly.clear();
      std::string tok;
      while (ss >> tok) {
        const std::int64_t idx = std::stoll(tok.substr(0, tok.find('/')));
        // OBJ indices are 1-based; negative values count back from the end.
        poly.push_back(idx > 0 ? idx - 1 : static_cast<std::int64_t>(out.mesh.vertices.size()) + idx);
      }
      if (poly.size() < 3) throw InputError("face with fewer than 3 vertices in " + path.string());
      add_polygon(out.mesh, nullptr, poly, 0, out.dropped_faces);
    }
  }
  return out;
}

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

PlyType parse_ply_type(const std::string& s) {
  if (s == "char" || s == "int8") return PlyType::i8;
  if (s == "uchar" || s == "uint8") return PlyType::u8;
  if (s == "short" || s == "int16") return PlyType::i16;
  if (s == "ushort" || s == "uint16") return PlyType::u16;
  if (s == "int" || s == "int32") return PlyType::i32;
  if (s == "uint" || s == "uint32") return PlyType::u32;
  if (s == "float" || s == "float32") return PlyType::f32;
  if (s == "double" || s == "float64") return PlyType::f64;
  throw InputError("unknown PLY property type " + s);
}

std::size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f32;
  bool is_list = false;
  PlyType count_type = PlyType::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

enum class PlyFormat { ascii, binary_le, binary_be };

class PlyReader {
 public:
  PlyReader(std::istream& in, PlyFormat format) : in_(in), format_(format) {}

  double read(PlyType t) {
    if (format_ == PlyFormat::ascii) {
      double v;
      if (!(in_ >> v)) throw InputError("truncated ASCII PLY body");
      return v;
    }
    unsigned char buf[8];
    const std::size_t n = ply_type_size(t);
    if (!in_.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n))) {
      throw InputError("truncated binary PLY body");
    }
    const bool swap = (format_ == PlyFormat::binary_be) == (std::endian::native == std::endian::little);
    if (swap) std::reverse(buf, buf + n);
    switch (t) {
      case PlyType::i8: return static_cast<std::int8_t>(buf[0]);
      case PlyType::u8: return buf[0];
      case PlyType::i16: { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
      case PlyType::u16: { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
      case PlyType::i32: { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
      case PlyType::u32: { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
      case PlyType::f32: { float v; std::memcpy(&v, buf, 4); return v; }
      case PlyType::f64: { double v; std::memcpy(&v, buf, 8); return v; }
    }
    return 0.0;
  }

 private:
  std::istream& in_;
  PlyFormat format_;
};

struct PlyData {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  std::vector<std::uint8_t> mask;
  std::vector<std::vector<std::int64_t>> polygons;
  std::vector<int> face_labels;
  bool has_normals = false;
  bool has_mask = false;
  bool has_labels = false;
};

PlyData read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw InputError("missing PLY magic in " + path.string());
  PlyFormat format = PlyFormat::ascii;
  std::vector<PlyElement> elements;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "format") {
      std::string f;
      ss >> f;
      if (f == "ascii") format = PlyFormat::ascii;
      else if (f == "binary_little_endian") format = PlyFormat::binary_le;
      else if (f == "binary_big_endian") format = PlyFormat::binary_be;
      else throw InputError("unsupported PLY format " + f);
    } else if (tag == "element") {
      PlyElement e;
      ss >> e.name >> e.count;
      elements.push_back(e);
    } else if (tag == "property") {
      if (elements.empty()) throw InputError("PLY property before element");
      PlyProperty p;
      std::string type;
      ss >> type;
      if (type == "list") {
        std::string ct, it;
        ss >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_ply_type(ct);
        p.type = parse_ply_type(it);
      } else {
        p.type = parse_ply_type(type);
        ss >> p.name;
      }
      elements.back().properties.push_back(p);
    } else if (tag == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw InputError("PLY header not terminated in " + path.string());

  PlyData data;
  PlyReader reader(in, format);
  for (const PlyElement& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    for (const PlyProperty& p : e.properties) {
      if (is_vertex && p.name == "nx") data.has_normals = true;
      if (is_vertex && p.name == "mask") data.has_mask = true;
      if (is_face && p.name == "part") data.has_labels = true;
    }
    for (std::size_t row = 0; row < e.count; ++row) {
      Vec3 pos = Vec3::Zero();
      Vec3 nrm = Vec3::Zero();
      double mask = 0.0;
      double label = 0.0;
      std::vector<std::int64_t> poly;
      for (const PlyProperty& p : e.properties) {
        if (p.is_list) {
          const auto n = static_cast<std::size_t>(reader.read(p.count_type));
          for (std::size_t k = 0; k < n; ++k) {
            const double v = reader.read(p.type);
            if (is_face && (p.name == "vertex_indices" || p.name == "vertex_index")) {
              poly.push_back(static_cast<std::int64_t>(v));
            }
          }
          continue;
        }
        const double v = reader.read(p.type);
        if (is_vertex) {
          if (p.name == "x") pos.x() = v;
          else if (p.name == "y") pos.y() = v;
          else if (p.name == "z") pos.z() = v;
          else if (p.name == "nx") nrm.x() = v;
          else if (p.name == "ny") nrm.y() = v;
          else if (p.name == "nz") nrm.z() = v;
          else if (p.name == "mask") mask = v;
        } else if (is_face && p.name == "part") {
          label = v;
        }
      }
      if (is_vertex) {
        if (!pos.allFinite()) throw InputError("non-finite vertex in " + path.string());
        data.positions.push_back(pos);
        data.normals.push_back(nrm);
        data.mask.push_back(static_cast<std::uint8_t>(mask != 0.0));
      } else if (is_face) {
        data.polygons.push_back(std::move(poly));
        data.face_labels.push_back(static_cast<int>(label));
      }
    }
  }
  return data;
}

LoadedMesh load_ply(const std::filesystem::path& path) {
  PlyData data = read_ply(path);
  LoadedMesh out;
  out.mesh.vertices = std::move(data.positions);
  std::vector<int> labels;
  for (std::size_t f = 0; f < data.polygons.size(); ++f) {
    if (data.polygons[f].size() < 3) throw InputError("face with fewer than 3 vertices in " + path.string());
    add_polygon(out.mesh, data.has_labels ? &labels : nullptr, data.polygons[f], data.face_labels[f],
                out.dropped_faces);
  }
  if (data.has_labels) out.mesh.labels = std::move(labels);
  return out;
}

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "binary writers assume a little-endian host");
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

LoadedMesh load_mesh(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  LoadedMesh out;
  if (ext == ".obj") out = load_obj(path);
  else if (ext == ".ply") out = load_ply(path);
  else throw InputError("unsupported mesh format: " + path.string());
  if (out.mesh.faces.empty()) throw InputError("no valid faces in " + path.string());
  return out;
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path, std::span<const std::string> comments) {
  for (const std::string& c : comments)
    if (c.find('\n') != std::string::npos) throw InputError("mesh header comments must be single lines");
  const std::string ext = lower_ext(path);
  if (ext == ".obj") {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out.precision(17);
    for (const std::string& c : comments) out << "# " << c << '\n';
    for (const Vec3& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const Face& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    if (!out) throw InputError("write failed for " + path.string());
    return;
  }
  if (ext != ".ply") throw InputError("unsupported mesh format: " + path.string());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\n";
  for (const std::string& c : comments) out << "comment " << c << "\n";
  out << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\n";
  if (mesh.has_labels()) out << "property int part\n";
  out << "end_header\n";
  for (const Vec3& v : mesh.vertices) {
    put(out, v.x());
    put(out, v.y());
    put(out, v.z());
  }
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    put<std::uint8_t>(out, 3);
    for (auto i : mesh.faces[f]) put<std::int32_t>(out, i);
    if (mesh.has_labels()) put<std::int32_t>(out, mesh.labels[f]);
  }
  if (!out) throw InputError("write failed for " + path.string());
}

void save_points(const PointCloud& cloud, const std::filesystem::path& path,
                 const std::vector<std::uint8_t>* mask) {
  if (mask && mask->size() != cloud.size()) throw InputError("mask length does not match point count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "property double nx\nproperty double ny\nproperty double nz\n";
  if (mask) out << "property uchar mask\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int c = 0; c < 3; ++c) put(out, cloud.positions[i][c]);
    for (int c = 0; c < 3; ++c) put(out, cloud.normals[i][c]);
    if (mask) put<std::uint8_t>(out, (*mask)[i]);
  }
  if (!out) throw InputError("write failed for " + path.string());
}

LoadedPoints load_points(const std::filesystem::path& path) {
  PlyData data = read_ply(path);
  LoadedPoints out;
  out.cloud.positions = std::move(data.positions);
  out.cloud.normals = std::move(data.normals);
  if (data.has_mask) out.mask = std::move(data.mask);
  return out;
}

}  // namespace holopart
