#include "holopart/synthetic.hpp"

#include "holopart/primitives.hpp"
#include "holopart/sampling.hpp"
#include "holopart/spatial.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

namespace holopart::synthetic {

std::string to_string(Family family) {
  switch (family) {
    case Family::table: return "table";
    case Family::chair: return "chair";
    case Family::lamp: return "lamp";
    case Family::stacked: return "stacked";
  }
  return "table";
}

Family family_from_string(const std::string& name) {
  for (Family f : kAllFamilies)
    if (to_string(f) == name) return f;
  if (name == "stacked-primitives") return Family::stacked;
  throw InputError("unknown assembly family: " + name);
}

namespace {

constexpr double kGap = 0.02;

// Shape parameters drawn once per seed; `build` maps them plus a contact level in [0, 1]
// to part meshes. Contact 0 leaves every part disjoint.
struct Shape {
  Family family;
  std::array<double, 12> p{};
  int count = 0;
  bool round = false;
};

Shape draw_shape(Family family, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, "synthetic-shape"));
  const auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  Shape s{family};
  switch (family) {
    case Family::table:
      // width, depth, top thickness, top height, leg half-width, inset, shelf height frac,
      // shelf thickness, post protrusion
      s.p = {u(1.4, 2.0), u(0.8, 1.3), u(0.35, 0.5), u(0.8, 1.1), u(0.07, 0.11), u(0.06, 0.12), u(0.2, 0.35),
             u(0.25, 0.35), u(0.12, 0.25)};
      s.round = u(0.0, 1.0) < 0.5;
      break;
    case Family::chair:
      // width, depth, seat thickness, seat height, back height, leg half-width, panel
      // thickness, panel height frac, protrusion
      s.p = {u(0.8, 1.1), u(0.8, 1.0), u(0.3, 0.4), u(0.7, 0.95), u(0.8, 1.1), u(0.06, 0.09), u(0.12, 0.18),
             u(0.55, 0.75), u(0.08, 0.15)};
      s.round = u(0.0, 1.0) < 0.5;
      break;
    case Family::lamp:
      // base radius, base height, pole radius, shade center height, shade radius, protrusion
      s.p = {u(0.3, 0.45), u(0.15, 0.25), u(0.05, 0.08), u(1.2, 1.5), u(0.4, 0.55), u(0.12, 0.25)};
      s.round = u(0.0, 1.0) < 0.5;  // spherical shade when set
      break;
    case Family::stacked:
      // core radius, rod radius, rod length, three side/shift draws
      s.p = {u(0.5, 0.65), u(0.07, 0.11), u(1.7, 2.1), u(0.0, 1.0), u(0.0, 1.0), u(0.0, 1.0)};
      s.count = 1 + static_cast<int>(u(0.0, 3.0));
      s.round = u(0.0, 1.0) < 0.6;  // spherical core when set
      break;
  }
  return s;
}

TriMesh make_leg(const Vec3& bottom, double height, double half, bool round, double max_edge) {
  if (round) {
    const int segments = std::max(16, static_cast<int>(std::ceil(2.0 * std::numbers::pi * half / max_edge)));
    return make_cylinder(bottom, bottom + Vec3(0, height, 0), half, segments, max_edge);
  }
  return make_box({bottom - Vec3(half, 0, half), bottom + Vec3(half, height, half)}, max_edge);
}

TriMesh make_rod(const Vec3& a, const Vec3& b, double radius, double max_edge) {
  const int segments = std::max(16, static_cast<int>(std::ceil(2.0 * std::numbers::pi * radius / max_edge)));
  return make_cylinder(a, b, radius, segments, max_edge);
}

TriMesh make_ball(const Vec3& c, double radius, double max_edge) {
  int level = 1;
  while (level < 5 && radius * 1.1 / (1 << level) > max_edge) ++level;
  return make_icosphere(c, radius, level);
}

// Penetrating parts slide sideways out of their occluders as contact goes to 0.
std::vector<TriMesh> build(const Shape& s, double contact, double max_edge) {
  const auto& p = s.p;
  const double away = 1.0 - contact;
  std::vector<TriMesh> parts;
  switch (s.family) {
    case Family::table: {
      const double w = p[0], d = p[1], t = p[2], h = p[3], r = p[4], inset = p[5];
      const double shelf_y = p[6] * h, shelf_t = p[7], up = p[8];
      parts.push_back(make_box({Vec3(-w / 2, h, -d / 2), Vec3(w / 2, h + t, d / 2)}, max_edge));
      parts.push_back(make_box({Vec3(-w / 2 + 0.04, shelf_y, -d / 2 + 0.04), Vec3(w / 2 - 0.04, shelf_y + shelf_t, d / 2 - 0.04)},
                               max_edge));
      const double shift = away * (inset + 2 * r + kGap);
      for (double sx : {-1.0, 1.0})
        for (double sz : {-1.0, 1.0})
          parts.push_back(make_leg(Vec3(sx * (w / 2 - inset - r + shift), 0, sz * (d / 2 - inset - r)), h + t + up, r, s.round,
                                   max_edge));
      break;
    }
    case Family::chair: {
      const double w = p[0], d = p[1], t = p[2], h = p[3], back = p[4], r = p[5], panel_t = p[6];
      const double panel_h = p[7] * back, up = p[8];
      parts.push_back(make_box({Vec3(-w / 2, h, -d / 2), Vec3(w / 2, h + t, d / 2)}, max_edge));
      const double xp = w / 2 - r - 0.04;
      const double shift = away * (2 * r + 0.04 + kGap);
      for (double sx : {-1.0, 1.0})
        parts.push_back(make_leg(Vec3(sx * xp, 0, -d / 2 + r + 0.04 - shift), h + t + 0.5 * up, r, s.round, max_edge));
      const double zp = d / 2 - r - 0.04;
      for (double sx : {-1.0, 1.0})
        parts.push_back(make_leg(Vec3(sx * xp, 0, zp + shift), h + t + back + up, r, s.round, max_edge));
      const double top = h + t + back;
      parts.push_back(make_box({Vec3(-xp - r - 0.03, top - panel_h, zp - panel_t / 2), Vec3(xp + r + 0.03, top, zp + panel_t / 2)},
                               max_edge));
      break;
    }
    case Family::lamp: {
      const double rb = p[0], hb = p[1], rp = p[2], ys = p[3], rs = p[4], up = p[5];
      parts.push_back(make_rod(Vec3(0, 0, 0), Vec3(0, hb, 0), rb, max_edge));
      const double shade_top = s.round ? ys + rs : ys + 0.7 * rs;
      if (s.round) parts.push_back(make_ball(Vec3(0, ys, 0), rs, max_edge));
      else parts.push_back(make_rod(Vec3(0, ys - 0.7 * rs, 0), Vec3(0, shade_top, 0), rs, max_edge));
      const double x = away * (std::max(rb, rs) + rp + kGap);
      parts.push_back(make_rod(Vec3(x, 0.3 * hb, 0), Vec3(x, shade_top + up, 0), rp, max_edge));
      break;
    }
    case Family::stacked: {
      const double rc = p[0], r = p[1], len = p[2];
      if (s.round) parts.push_back(make_ball(Vec3::Zero(), rc, max_edge));
      else parts.push_back(make_box({Vec3::Constant(-rc * 0.85), Vec3::Constant(rc * 0.85)}, max_edge));
      const double offset = away * (rc + r + kGap);
      for (int i = 0; i < s.count; ++i) {
        Vec3 axis = Vec3::Zero(), shift = Vec3::Zero();
        axis[i] = 1.0;
        shift[(i + 1) % 3] = (p[3 + i] < 0.5 ? -1.0 : 1.0) * offset;
        // Later rods sit a little off the first so rods do not share an axis line.
        shift[(i + 2) % 3] += 0.3 * r * i;
        const double frac = 0.5 + 0.1 * (p[3 + i] - 0.5);
        parts.push_back(make_rod(shift - frac * len * axis, shift + (1.0 - frac) * len * axis, r, max_edge));
      }
      break;
    }
  }
  return parts;
}

std::vector<TriMesh> normalized(std::vector<TriMesh> parts, const NormTransform& t) {
  for (TriMesh& m : parts) m = transformed(m, t);
  return parts;
}

// Fraction of total part area lying inside another part, by surface sampling.
double estimate_occlusion(std::span<const TriMesh> parts, int samples, std::uint64_t seed) {
  std::vector<double> areas;
  double total = 0.0;
  for (const TriMesh& m : parts) total += areas.emplace_back(surface_area(m));
  std::vector<std::unique_ptr<InsideTester>> inside;
  for (const TriMesh& m : parts) inside.push_back(std::make_unique<InsideTester>(m));
  double hidden = 0.0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto n = static_cast<std::size_t>(std::max(16.0, std::round(samples * areas[k] / total)));
    const PointCloud pts = sampling::sample_surface(parts[k], n, derive_seed(seed, k));
    std::size_t count = 0;
    for (const Vec3& q : pts.positions) {
      for (std::size_t j = 0; j < parts.size(); ++j) {
        if (j != k && inside[j]->inside(q)) {
          ++count;
          break;
        }
      }
    }
    hidden += areas[k] * static_cast<double>(count) / static_cast<double>(n);
  }
  return hidden / total;
}

struct Built {
  std::vector<TriMesh> parts;
  NormTransform transform;
};

Built build_normalized(const Shape& shape, double contact, double max_edge) {
  const TriMesh preview = merge_meshes(build(shape, contact, 1e9));
  const NormTransform t = unit_transform(bounding_box(preview));
  return {normalized(build(shape, contact, max_edge / t.scale), t), t};
}

}  // namespace

double max_occlusion(Family family, std::uint64_t seed, const GenOptions& options) {
  const Shape shape = draw_shape(family, seed);
  const Built b = build_normalized(shape, 1.0, options.max_edge);
  return estimate_occlusion(b.parts, options.estimate_samples, derive_seed(seed, "occlusion-estimate"));
}

Assembly gen_assembly(const AssemblySpec& spec, const GenOptions& options) {
  if (!(spec.occlusion >= 0.0 && spec.occlusion < 1.0)) throw InputError("occlusion target must lie in [0, 1)");
  const Shape shape = draw_shape(spec.family, spec.seed);
  const std::uint64_t est_seed = derive_seed(spec.seed, "occlusion-estimate");
  // Bisection runs on coarse meshes; only the final build is finely tessellated.
  const double coarse = std::max(options.max_edge, 0.1);
  const auto occlusion_at = [&](double contact) {
    return estimate_occlusion(build_normalized(shape, contact, coarse).parts, options.estimate_samples, est_seed);
  };

  double contact = 0.0;
  if (spec.occlusion > 0.0) {
    const double top = occlusion_at(1.0);
    if (spec.occlusion > top + 0.05) {
      throw InputError("occlusion target " + std::to_string(spec.occlusion) + " exceeds the " + to_string(spec.family) +
                       " range (max ~" + std::to_string(top) + ")");
    }
    double lo = 0.0, hi = 1.0;
    if (spec.occlusion >= top) {
      lo = 1.0;
    } else {
      for (int it = 0; it < 10; ++it) {
        const double mid = 0.5 * (lo + hi);
        (occlusion_at(mid) < spec.occlusion ? lo : hi) = mid;
      }
    }
    contact = std::max(0.5 * (lo + hi), 1e-3);
  }

  Assembly out;
  out.family = spec.family;
  out.occlusion_target = spec.occlusion;
  const Built b = build_normalized(shape, contact, options.max_edge);
  const TriMesh merged = merge_meshes(b.parts);
  const TriMesh visible = curation::visibility_cull(merged, options.visibility);
  out.object.source_id = to_string(spec.family) + "_" + std::to_string(spec.seed);
  out.object.parts = b.parts;
  out.object.whole = visible;
  out.object.surface_masks = visible.labels;

  double total = 0.0, seen = 0.0;
  std::vector<double> seen_part(b.parts.size(), 0.0);
  for (std::size_t f = 0; f < visible.faces.size(); ++f) seen_part[visible.labels[f]] += face_area(visible, f);
  for (std::size_t k = 0; k < b.parts.size(); ++k) {
    const double area = surface_area(b.parts[k]);
    total += area;
    seen += seen_part[k];
    out.part_hidden.push_back(std::clamp(1.0 - seen_part[k] / area, 0.0, 1.0));
  }
  out.occlusion_measured = std::clamp(1.0 - seen / total, 0.0, 1.0);
  out.focus_part = static_cast<int>(std::max_element(out.part_hidden.begin(), out.part_hidden.end()) - out.part_hidden.begin());
  return out;
}

std::vector<DatasetEntry> gen_dataset(int n, std::span<const Family> families, std::uint64_t seed) {
  if (n < 1) throw InputError("dataset size must be positive");
  if (families.empty()) throw InputError("no assembly families given");
  std::vector<DatasetEntry> entries(n);
  std::map<Family, std::vector<int>> by_family;
  for (int i = 0; i < n; ++i) {
    DatasetEntry& e = entries[i];
    e.family = families[i % families.size()];
    e.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    e.id = to_string(e.family) + "_" + std::to_string(i);
    // Contact-level targets are drawn as a fraction of the family maximum.
    std::mt19937_64 rng(derive_seed(e.seed, "occlusion-target"));
    const double frac = std::uniform_real_distribution<double>(0.9, 1.0)(rng);
    e.occlusion = std::round(frac * max_occlusion(e.family, e.seed, GenOptions{0.1}) * 1e4) / 1e4;
    by_family[e.family].push_back(i);
  }
  // Per-family split sizes by largest remainder, so family shares hold in every split and the
  // totals are exact. Within a family, membership follows the seed-hash order.
  const int n_val = static_cast<int>(std::lround(0.1 * n));
  const int n_test = static_cast<int>(std::lround(0.1 * n));
  const auto allocate = [&](int total) {
    std::map<Family, int> out;
    std::vector<std::pair<double, Family>> remainders;
    int given = 0;
    for (const auto& [family, idx] : by_family) {
      const double ideal = static_cast<double>(total) * static_cast<double>(idx.size()) / n;
      out[family] = static_cast<int>(std::floor(ideal));
      given += out[family];
      remainders.emplace_back(ideal - std::floor(ideal), family);
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; given < total; ++k, ++given) ++out[remainders[k % remainders.size()].second];
    return out;
  };
  const std::map<Family, int> val = allocate(n_val), test = allocate(n_test);
  for (auto& [family, idx] : by_family) {
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return mix64(entries[a].seed) < mix64(entries[b].seed); });
    const int nv = std::min<int>(val.at(family), static_cast<int>(idx.size()));
    const int nt = std::min<int>(test.at(family), static_cast<int>(idx.size()) - nv);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const int rank = static_cast<int>(r);
      entries[idx[r]].split = rank < nv ? "val" : (rank < nv + nt ? "test" : "train");
    }
  }
  return entries;
}

void write_manifest(std::span<const DatasetEntry> entries, const std::filesystem::path& path,
                    const nlohmann::json& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  if (!header.is_null()) out << nlohmann::json{{"config", header}}.dump() << '\n';
  for (const DatasetEntry& e : entries) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["family"] = to_string(e.family);
    j["seed"] = e.seed;
    j["occlusion"] = e.occlusion;
    j["split"] = e.split;
    out << j.dump() << '\n';
  }
}

std::vector<DatasetEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest " + path.string());
  std::vector<DatasetEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("config")) continue;
      out.push_back({j.at("id").get<std::string>(), family_from_string(j.at("family").get<std::string>()),
                     j.at("seed").get<std::uint64_t>(), j.at("occlusion").get<double>(), j.value("split", "train")});
    } catch (const nlohmann::json::exception& e) {
      throw InputError("malformed manifest line in " + path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace holopart::synthetic
