#include "holopart/curation.hpp"

#include "holopart/mesh_io.hpp"
#include "holopart/primitives.hpp"
#include "holopart/spatial.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace holopart::curation {

namespace {

struct Point2 {
  double x, y;
};

// Calls visit(px, py, w0, w1, w2) for every pixel center inside the triangle, where the
// weights are barycentric. Pixel (px, py) has its center at (px + 0.5, py + 0.5).
template <typename Visit>
void rasterize(const Point2& a, const Point2& b, const Point2& c, int width, int height, Visit&& visit) {
  const double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  if (area == 0.0) return;
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}) - 0.5)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}) - 0.5)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}) - 0.5)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}) - 0.5)));
  const double inv = 1.0 / area;
  for (int py = y0; py <= y1; ++py) {
    const double y = py + 0.5;
    for (int px = x0; px <= x1; ++px) {
      const double x = px + 0.5;
      const double w0 = ((b.x - x) * (c.y - y) - (b.y - y) * (c.x - x)) * inv;
      const double w1 = ((c.x - x) * (a.y - y) - (c.y - y) * (a.x - x)) * inv;
      const double w2 = 1.0 - w0 - w1;
      if (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0) visit(px, py, w0, w1, w2);
    }
  }
}

Point2 project(const Vec3& p, View view) {
  return view == View::frontal ? Point2{p.x(), p.y()} : Point2{p.z(), p.y()};
}

}  // namespace

TriMesh PartObject::patch(int k) const {
  std::vector<std::size_t> faces;
  for (std::size_t f = 0; f < surface_masks.size(); ++f)
    if (surface_masks[f] == k) faces.push_back(f);
  return submesh(whole, faces);
}

void validate(const PartObject& object) {
  if (object.parts.empty()) throw InputError("part object has no parts");
  holopart::validate(object.whole);
  if (object.surface_masks.size() != object.whole.faces.size())
    throw InputError("surface mask count does not match whole face count");
  const int n = static_cast<int>(object.parts.size());
  for (int id : object.surface_masks)
    if (id < 0 || id >= n) throw InputError("surface mask id out of range");
  for (const TriMesh& p : object.parts) holopart::validate(p);
}

std::size_t BinaryImage::count() const {
  return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), std::uint8_t{1}));
}

BinaryImage render_silhouette(const TriMesh& mesh, View view, int resolution, const std::optional<AABB>& frame) {
  if (mesh.empty()) throw InputError("cannot render an empty mesh");
  if (resolution < 1) throw InputError("silhouette resolution must be positive");
  const AABB box = frame ? *frame : bounding_box(mesh);
  const Point2 lo = project(box.min, view), hi = project(box.max, view);
  if (hi.x - lo.x <= 0.0 && hi.y - lo.y <= 0.0) throw GeometryError("zero-extent projection");
  const double longest = box.extent().maxCoeff();
  const double scale = 0.9 * resolution / longest;
  const Point2 mid{0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y)};
  const auto to_pixel = [&](const Vec3& p) {
    const Point2 q = project(p, view);
    // Image rows grow downward.
    return Point2{0.5 * resolution + (q.x - mid.x) * scale, 0.5 * resolution - (q.y - mid.y) * scale};
  };

  BinaryImage img{resolution, resolution, std::vector<std::uint8_t>(static_cast<std::size_t>(resolution) * resolution, 0)};
  for (const Face& f : mesh.faces) {
    rasterize(to_pixel(mesh.vertices[f[0]]), to_pixel(mesh.vertices[f[1]]), to_pixel(mesh.vertices[f[2]]),
              resolution, resolution,
              [&](int px, int py, double, double, double) { img.pixels[static_cast<std::size_t>(py) * resolution + px] = 1; });
  }
  if (img.count() > 0) return img;
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& v : mesh.vertices) centroid += v;
  centroid /= static_cast<double>(mesh.vertices.size());
  const Point2 c = to_pixel(centroid);
  const int cx = std::clamp(static_cast<int>(std::floor(c.x)), 0, resolution - 1);
  const int cy = std::clamp(static_cast<int>(std::floor(c.y)), 0, resolution - 1);
  img.pixels[static_cast<std::size_t>(cy) * resolution + cx] = 1;
  return img;
}

int count_components(const BinaryImage& image) {
  std::vector<std::uint8_t> seen(image.pixels.size(), 0);
  std::vector<std::pair<int, int>> stack;
  int components = 0;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * image.width + x;
      if (!image.pixels[i] || seen[i]) continue;
      ++components;
      seen[i] = 1;
      stack.emplace_back(x, y);
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= image.width || ny >= image.height) continue;
            const std::size_t j = static_cast<std::size_t>(ny) * image.width + nx;
            if (image.pixels[j] && !seen[j]) {
              seen[j] = 1;
              stack.emplace_back(nx, ny);
            }
          }
        }
      }
    }
  }
  return components;
}

std::string to_string(Rule rule) {
  switch (rule) {
    case Rule::none: return "none";
    case Rule::mesh_count: return "mesh_count";
    case Rule::components: return "components";
    case Rule::dominance: return "dominance";
  }
  return "none";
}

CurationDecision filter_mesh_count(const std::string& id, std::size_t part_count) {
  CurationDecision d;
  d.id = id;
  d.diagnostics["part_count"] = static_cast<double>(part_count);
  if (part_count < static_cast<std::size_t>(kMinParts) || part_count > static_cast<std::size_t>(kMaxParts)) {
    d.pass = false;
    d.failed_rule = Rule::mesh_count;
  }
  return d;
}

ComponentStats component_stats(const std::string& id, std::span<const TriMesh> parts, int resolution) {
  if (parts.empty()) throw InputError("component statistics need at least one part");
  std::vector<double> counts;
  for (const TriMesh& p : parts) {
    for (View v : {View::frontal, View::side}) counts.push_back(count_components(render_silhouette(p, v, resolution)));
  }
  ComponentStats s;
  s.id = id;
  for (double c : counts) s.mean += c;
  s.mean /= static_cast<double>(counts.size());
  std::sort(counts.begin(), counts.end(), std::greater<>());
  const std::size_t k = std::min<std::size_t>(3, counts.size());
  for (std::size_t i = 0; i < k; ++i) s.top3_mean += counts[i];
  s.top3_mean /= static_cast<double>(k);
  return s;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (rank - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<CurationDecision> filter_connected_components(std::span<const ComponentStats> corpus, double q) {
  std::vector<CurationDecision> out;
  out.reserve(corpus.size());
  if (corpus.size() < 2) {
    for (const ComponentStats& s : corpus) {
      CurationDecision d;
      d.id = s.id;
      d.diagnostics["component_mean"] = s.mean;
      d.diagnostics["component_top3"] = s.top3_mean;
      d.warnings.push_back("corpus too small for a component percentile; rule skipped");
      out.push_back(std::move(d));
    }
    return out;
  }
  std::vector<double> means, tops;
  for (const ComponentStats& s : corpus) {
    means.push_back(s.mean);
    tops.push_back(s.top3_mean);
  }
  const double mean_cut = percentile(means, q);
  const double top_cut = percentile(tops, q);
  for (const ComponentStats& s : corpus) {
    CurationDecision d;
    d.id = s.id;
    d.diagnostics["component_mean"] = s.mean;
    d.diagnostics["component_top3"] = s.top3_mean;
    d.diagnostics["component_mean_cut"] = mean_cut;
    d.diagnostics["component_top3_cut"] = top_cut;
    if (s.mean > mean_cut || s.top3_mean > top_cut) {
      d.pass = false;
      d.failed_rule = Rule::components;
    }
    out.push_back(std::move(d));
  }
  return out;
}

namespace {

double coverage(const BinaryImage& whole, const BinaryImage& part) {
  std::size_t fg = 0, both = 0;
  for (std::size_t i = 0; i < whole.pixels.size(); ++i) {
    if (!whole.pixels[i]) continue;
    ++fg;
    if (part.pixels[i]) ++both;
  }
  return static_cast<double>(both) / static_cast<double>(fg);
}

}  // namespace

CurationDecision filter_volume_dominance(const std::string& id, const ViewPair& whole, std::span<const ViewPair> parts,
                                         double threshold) {
  if (whole.frontal.count() == 0 || whole.side.count() == 0) throw GeometryError("empty whole silhouette");
  CurationDecision d;
  d.id = id;
  double worst = 0.0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double both = std::min(coverage(whole.frontal, parts[k].frontal), coverage(whole.side, parts[k].side));
    if (both > worst) {
      worst = both;
      d.diagnostics["dominant_part"] = static_cast<double>(k);
    }
  }
  d.diagnostics["max_coverage"] = worst;
  if (worst >= threshold) {
    d.pass = false;
    d.failed_rule = Rule::dominance;
  }
  return d;
}

CurationDecision filter_volume_dominance(const std::string& id, std::span<const TriMesh> parts, int resolution,
                                         double threshold) {
  const TriMesh whole = merge_meshes(parts);
  const AABB frame = bounding_box(whole);
  const ViewPair w{render_silhouette(whole, View::frontal, resolution, frame),
                   render_silhouette(whole, View::side, resolution, frame)};
  std::vector<ViewPair> ps;
  for (const TriMesh& p : parts)
    ps.push_back({render_silhouette(p, View::frontal, resolution, frame), render_silhouette(p, View::side, resolution, frame)});
  return filter_volume_dominance(id, w, ps, threshold);
}

FloaterMerge merge_floaters(std::span<const TriMesh> parts, double ratio) {
  FloaterMerge out;
  out.parts.assign(parts.begin(), parts.end());
  if (parts.size() < 2) return out;
  AABB total = bounding_box(parts[0]);
  for (const TriMesh& p : parts) {
    const AABB b = bounding_box(p);
    total.expand(b.min);
    total.expand(b.max);
  }
  const double whole_volume = total.volume();
  if (!(whole_volume > 0.0)) return out;
  std::vector<bool> floater(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) floater[i] = bounding_box(parts[i]).volume() < ratio * whole_volume;
  if (std::all_of(floater.begin(), floater.end(), [](bool f) { return f; })) return out;

  std::vector<std::unique_ptr<TriangleBvh>> bvh(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i)
    if (!floater[i]) bvh[i] = std::make_unique<TriangleBvh>(parts[i]);
  std::vector<std::vector<std::size_t>> absorbed(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!floater[i]) continue;
    const Vec3 c = bounding_box(parts[i]).center();
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < parts.size(); ++j) {
      if (floater[j]) continue;
      const double dist = bvh[j]->closest(c).distance_sq;
      if (dist < best_d) {
        best_d = dist;
        best = j;
      }
    }
    absorbed[best].push_back(i);
  }
  std::vector<TriMesh> merged;
  for (std::size_t j = 0; j < parts.size(); ++j) {
    if (floater[j]) continue;
    TriMesh m = parts[j];
    m.labels.clear();
    for (std::size_t i : absorbed[j]) {
      const auto base = static_cast<std::int32_t>(m.vertices.size());
      m.vertices.insert(m.vertices.end(), parts[i].vertices.begin(), parts[i].vertices.end());
      for (const Face& f : parts[i].faces) m.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
      ++out.merged;
    }
    merged.push_back(std::move(m));
  }
  out.parts = std::move(merged);
  return out;
}

std::vector<CurationDecision> curate(std::span<const RawObject> corpus, int resolution) {
  std::vector<CurationDecision> out(corpus.size());
  std::vector<FloaterMerge> merged;
  std::vector<ComponentStats> stats;
  merged.reserve(corpus.size());
  for (const RawObject& obj : corpus) {
    merged.push_back(merge_floaters(obj.parts));
    if (merged.back().parts.empty()) throw InputError("object " + obj.id + " has no parts");
    stats.push_back(component_stats(obj.id, merged.back().parts, resolution));
  }
  const std::vector<CurationDecision> comp = filter_connected_components(stats);

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& parts = merged[i].parts;
    CurationDecision d = filter_mesh_count(corpus[i].id, parts.size());
    d.diagnostics["merged_floaters"] = static_cast<double>(merged[i].merged);
    for (const auto& [k, v] : comp[i].diagnostics) d.diagnostics[k] = v;
    d.warnings = comp[i].warnings;
    if (d.pass && !comp[i].pass) {
      d.pass = false;
      d.failed_rule = Rule::components;
    }
    // Dominance is only meaningful with at least two parts.
    if (parts.size() >= 2) {
      const CurationDecision dom = filter_volume_dominance(corpus[i].id, parts, resolution);
      for (const auto& [k, v] : dom.diagnostics) d.diagnostics[k] = v;
      if (d.pass && !dom.pass) {
        d.pass = false;
        d.failed_rule = Rule::dominance;
      }
    }
    out[i] = std::move(d);
  }
  return out;
}

std::vector<Vec3> view_directions(int n) {
  if (n < 1) throw InputError("need at least one view direction");
  for (int level = 0; level <= 4; ++level) {
    if (n == 10 * (1 << (2 * level)) + 2) return icosphere_directions(level);
  }
  std::vector<Vec3> dirs;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    dirs.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
  }
  return dirs;
}

std::vector<std::uint8_t> visible_faces(const TriMesh& mesh, const VisibilityOptions& options) {
  std::vector<std::uint8_t> visible(mesh.faces.size(), 0);
  if (mesh.empty()) return visible;
  const AABB box = bounding_box(mesh);
  const Vec3 center = box.center();
  double radius = 0.0;
  for (const Vec3& v : mesh.vertices) radius = std::max(radius, (v - center).norm());
  if (!(radius > 0.0)) {
    std::fill(visible.begin(), visible.end(), 1);
    return visible;
  }
  // Pixel pitch is snapped to quarter octaves and the lattice is anchored at the origin of
  // the view plane, so removing hidden faces does not shift the pixel centers.
  const double raw_pitch = 2.0 * radius / options.resolution;
  const double pitch = std::exp2(std::ceil(4.0 * std::log2(raw_pitch)) / 4.0);

  std::vector<double> depth;
  std::vector<std::int32_t> id;
  std::vector<Point2> proj(mesh.vertices.size());
  std::vector<double> height(mesh.vertices.size());
  for (const Vec3& dir : view_directions(options.n_views)) {
    const Vec3 d = dir.normalized();
    const Vec3 helper = std::abs(d.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 u = d.cross(helper).normalized();
    const Vec3 v = d.cross(u);
    const double cu = center.dot(u), cv = center.dot(v);
    const int x_origin = static_cast<int>(std::floor((cu - radius) / pitch)) - 1;
    const int y_origin = static_cast<int>(std::floor((cv - radius) / pitch)) - 1;
    const int w = static_cast<int>(std::ceil((cu + radius) / pitch)) - x_origin + 2;
    const int h = static_cast<int>(std::ceil((cv + radius) / pitch)) - y_origin + 2;
    depth.assign(static_cast<std::size_t>(w) * h, -std::numeric_limits<double>::infinity());
    id.assign(depth.size(), -1);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      const Vec3& p = mesh.vertices[i];
      proj[i] = {p.dot(u) / pitch - x_origin, p.dot(v) / pitch - y_origin};
      height[i] = p.dot(d);  // larger is nearer the viewer
    }
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
      const Face& t = mesh.faces[f];
      rasterize(proj[t[0]], proj[t[1]], proj[t[2]], w, h, [&](int px, int py, double w0, double w1, double w2) {
        const double z = w0 * height[t[0]] + w1 * height[t[1]] + w2 * height[t[2]];
        const std::size_t i = static_cast<std::size_t>(py) * w + px;
        if (z > depth[i]) {
          depth[i] = z;
          id[i] = static_cast<std::int32_t>(f);
        }
      });
    }
    for (std::int32_t f : id)
      if (f >= 0) visible[f] = 1;
  }
  return visible;
}

TriMesh visibility_cull(const TriMesh& mesh, const VisibilityOptions& options) {
  const std::vector<std::uint8_t> visible = visible_faces(mesh, options);
  std::vector<std::size_t> keep;
  for (std::size_t f = 0; f < visible.size(); ++f)
    if (visible[f]) keep.push_back(f);
  return submesh(mesh, keep);
}

std::vector<int> assign_part_masks(const TriMesh& whole, std::span<const TriMesh> parts) {
  if (parts.empty()) throw InputError("mask assignment needs at least one part");
  std::vector<std::unique_ptr<TriangleBvh>> bvh;
  for (const TriMesh& p : parts) {
    if (p.empty()) throw InputError("mask assignment with an empty part");
    bvh.push_back(std::make_unique<TriangleBvh>(p));
  }
  std::vector<int> labels(whole.faces.size(), 0);
  for (std::size_t f = 0; f < whole.faces.size(); ++f) {
    const Vec3 c = face_centroid(whole, f);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < parts.size(); ++k) {
      // Prune with the current best so far; strict '<' keeps the lower index on ties.
      const double d = bvh[k]->closest(c, best).distance_sq;
      if (d < best) {
        best = d;
        labels[f] = static_cast<int>(k);
      }
    }
  }
  return labels;
}

PartObject make_whole_part_pairs(const std::string& id, std::span<const TriMesh> raw_parts, const PairOptions& options) {
  if (raw_parts.empty()) throw InputError("object " + id + " has no parts");
  const TriMesh merged = merge_meshes(raw_parts);
  const NormTransform t = unit_transform(bounding_box(merged));
  const TriMesh merged_n = transformed(merged, t);

  const TriMesh visible = visibility_cull(merged_n, options.visibility);
  if (visible.empty()) throw GeometryError(id + ": visibility_cull left no faces");

  PartObject out;
  out.source_id = id;
  try {
    out.whole = field::watertight_proxy(visible, options.watertight);
  } catch (const GeometryError& e) {
    throw GeometryError(id + ": whole watertight proxy failed: " + e.what());
  }
  for (std::size_t k = 0; k < raw_parts.size(); ++k) {
    try {
      out.parts.push_back(field::watertight_proxy(transformed(raw_parts[k], t), options.watertight));
    } catch (const GeometryError& e) {
      throw GeometryError(id + ": part " + std::to_string(k) + " watertight proxy failed: " + e.what());
    }
  }
  out.surface_masks = assign_part_masks(out.whole, out.parts);
  out.whole.labels = out.surface_masks;
  return out;
}

void save_part_object(const PartObject& object, const std::filesystem::path& dir, std::span<const std::string> comments) {
  std::filesystem::create_directories(dir);
  TriMesh whole = object.whole;
  whole.labels = object.surface_masks;
  save_mesh(whole, dir / "whole.ply", comments);
  for (std::size_t k = 0; k < object.parts.size(); ++k) {
    TriMesh p = object.parts[k];
    p.labels.clear();
    save_mesh(p, dir / ("part_" + std::to_string(k) + ".ply"), comments);
  }
  nlohmann::json j;
  j["source_id"] = object.source_id;
  j["part_count"] = object.parts.size();
  j["face_parts"] = object.surface_masks;
  if (!comments.empty()) j["comments"] = std::vector<std::string>(comments.begin(), comments.end());
  std::ofstream out(dir / "masks.json", std::ios::binary);
  if (!out) throw InputError("cannot write " + (dir / "masks.json").string());
  out << j.dump() << '\n';
}

PartObject load_part_object(const std::filesystem::path& dir) {
  std::ifstream in(dir / "masks.json");
  if (!in) throw InputError("missing masks.json in " + dir.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed masks.json in " + dir.string() + ": " + e.what());
  }
  PartObject obj;
  obj.source_id = j.value("source_id", dir.filename().string());
  const std::size_t n = j.at("part_count").get<std::size_t>();
  obj.surface_masks = j.at("face_parts").get<std::vector<int>>();
  obj.whole = load_mesh(dir / "whole.ply").mesh;
  obj.whole.labels = obj.surface_masks;
  for (std::size_t k = 0; k < n; ++k) obj.parts.push_back(load_mesh(dir / ("part_" + std::to_string(k) + ".ply")).mesh);
  validate(obj);
  return obj;
}

}  // namespace holopart::curation
