#include "fixtures.hpp"

#include "holopart/curation.hpp"
#include "holopart/field.hpp"
#include "holopart/spatial.hpp"

#include <doctest.h>

#include <random>
#include <set>

using namespace holopart;
using namespace holopart::curation;

namespace {

int flood_fill_oracle(const BinaryImage& img) {
  // Union-find over 8-neighbours, independent of the stack-based fill.
  std::vector<int> parent(img.pixels.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
  const auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (!img.at(x, y)) continue;
      for (auto [dx, dy] : {std::pair{1, 0}, {0, 1}, {1, 1}, {-1, 1}}) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || nx >= img.width || ny >= img.height || !img.at(nx, ny)) continue;
        parent[find(y * img.width + x)] = find(ny * img.width + nx);
      }
    }
  std::set<int> roots;
  for (int i = 0; i < static_cast<int>(img.pixels.size()); ++i)
    if (img.pixels[i]) roots.insert(find(i));
  return static_cast<int>(roots.size());
}

BinaryImage blank(int w, int h) { return {w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0)}; }

}  // namespace

TEST_CASE("mesh count rule") {
  CHECK(filter_mesh_count("a", 1).failed_rule == Rule::mesh_count);
  CHECK(filter_mesh_count("a", 2).pass);
  CHECK(filter_mesh_count("a", 15).pass);
  const auto d = filter_mesh_count("a", 16);
  CHECK_FALSE(d.pass);
  CHECK(d.failed_rule == Rule::mesh_count);
}

TEST_CASE("cube silhouette fill ratio") {
  const TriMesh cube = fixtures::box(Vec3(-1, -1, -1), Vec3(1, 1, 1));
  const BinaryImage img = render_silhouette(cube, View::frontal, 256);
  const double fill = static_cast<double>(img.count()) / (256.0 * 256.0);
  CHECK(fill == doctest::Approx(0.81).epsilon(0.01));
  CHECK(count_components(img) == 1);
  CHECK(render_silhouette(cube, View::side, 256).count() == img.count());
}

TEST_CASE("disjoint cubes along y give two frontal components") {
  const std::vector<TriMesh> cubes = {fixtures::box(Vec3(0, 0, 0), Vec3(1, 1, 1)),
                                      fixtures::box(Vec3(0, 2, 0), Vec3(1, 3, 1))};
  CHECK(count_components(render_silhouette(merge_meshes(cubes), View::frontal)) == 2);
}

TEST_CASE("thin rod seen end-on still sets a pixel") {
  const TriMesh rod = make_cylinder(Vec3(0, 0, -1), Vec3(0, 0, 1), 1e-4, 8);
  const BinaryImage img = render_silhouette(rod, View::frontal);
  CHECK(img.count() >= 1);
  CHECK(img.count() <= 4);
  CHECK(count_components(img) == 1);
}

TEST_CASE("zero extent projection is an error") {
  TriMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(0, 0, 0)};
  m.faces = {{0, 1, 2}};
  CHECK_THROWS_AS(render_silhouette(m, View::frontal), GeometryError);
}

TEST_CASE("component counting") {
  CHECK(count_components(blank(8, 8)) == 0);
  BinaryImage diag = blank(4, 4);
  diag.pixels[0] = 1;
  diag.pixels[5] = 1;
  CHECK(count_components(diag) == 1);

  std::mt19937_64 rng(17);
  std::bernoulli_distribution coin(0.45);
  for (int trial = 0; trial < 20; ++trial) {
    BinaryImage img = blank(64, 48);
    for (auto& p : img.pixels) p = coin(rng) ? 1 : 0;
    CHECK(count_components(img) == flood_fill_oracle(img));
  }
}

TEST_CASE("percentile interpolation") {
  CHECK(percentile({1, 2, 3, 4, 5}, 50) == doctest::Approx(3.0));
  CHECK(percentile({1, 2, 3, 4, 5, 6}, 85) == doctest::Approx(5.25));
  CHECK(percentile({7}, 85) == doctest::Approx(7.0));
}

TEST_CASE("connected component rule") {
  std::vector<ComponentStats> corpus;
  for (int i = 0; i < 9; ++i) corpus.push_back({"o" + std::to_string(i), 1.5, 2.0});
  corpus.push_back({"outlier", 15.0, 20.0});
  const auto d = filter_connected_components(corpus);
  for (int i = 0; i < 9; ++i) CHECK(d[i].pass);
  CHECK_FALSE(d[9].pass);
  // Distinct values: the top of the distribution is always above the cut.
  std::vector<ComponentStats> spread;
  for (int i = 0; i < 10; ++i) spread.push_back({"s" + std::to_string(i), 1.0 + i, 1.0 + i});
  const auto ds = filter_connected_components(spread);
  CHECK(std::count_if(ds.begin(), ds.end(), [](const CurationDecision& x) { return !x.pass; }) == 2);  // cut at 8.65
  CHECK_FALSE(ds[8].pass);
  CHECK_FALSE(ds[9].pass);
  CHECK(d[9].failed_rule == Rule::components);

  std::vector<ComponentStats> same(5, ComponentStats{"x", 2.0, 3.0});
  for (const auto& s : filter_connected_components(same)) CHECK(s.pass);

  const std::vector<ComponentStats> one = {{"solo", 50.0, 50.0}};
  const auto solo = filter_connected_components(one);
  CHECK(solo[0].pass);
  CHECK_FALSE(solo[0].warnings.empty());
}

TEST_CASE("dominance rule") {
  // Big cube and a tiny protruding cube: big covers about 95% of the whole in both views.
  const std::vector<TriMesh> big_small = {fixtures::box(Vec3(0, 0, 0), Vec3(1, 1, 1)),
                                          fixtures::box(Vec3(0.4, 0.95, 0.4), Vec3(0.63, 1.18, 0.63))};
  const auto d = filter_volume_dominance("big", big_small);
  CHECK_FALSE(d.pass);
  CHECK(d.failed_rule == Rule::dominance);
  CHECK(d.diagnostics.at("max_coverage") == doctest::Approx(0.95).epsilon(0.01));

  const auto table = filter_volume_dominance("table", fixtures::table());
  CHECK(table.pass);
  CHECK(table.diagnostics.at("max_coverage") < 0.9);

  CHECK(kDominanceThreshold == 0.90);
}

TEST_CASE("floaters merge into the nearest part") {
  std::vector<TriMesh> parts = fixtures::table();
  parts.push_back(fixtures::box(Vec3(0.9, 0.2, 0.5), Vec3(0.91, 0.21, 0.51)));
  const FloaterMerge m = merge_floaters(parts);
  CHECK(m.merged == 1);
  CHECK(m.parts.size() == 5);
  CHECK(m.parts[0].faces.size() == 24);
}

TEST_CASE("visibility of simple scenes") {
  const TriMesh cube = fixtures::box(Vec3(0, 0, 0), Vec3(1, 1, 1));
  CHECK(visibility_cull(cube).faces.size() == 12);

  const std::vector<TriMesh> nested = {fixtures::box(Vec3(0, 0, 0), Vec3(2, 2, 2)),
                                       fixtures::box(Vec3(0.5, 0.5, 0.5), Vec3(1, 1, 1))};
  const TriMesh culled = visibility_cull(merge_meshes(nested));
  CHECK(culled.faces.size() == 12);
  for (int l : culled.labels) CHECK(l == 0);
}

TEST_CASE("table visibility against a ray oracle") {
  const std::vector<TriMesh> parts = fixtures::table();
  const TriMesh whole = merge_meshes(parts);
  const auto visible = visible_faces(whole);
  const std::size_t kept = std::count(visible.begin(), visible.end(), 1);
  CHECK(kept > 0);
  CHECK(kept < whole.faces.size());

  // Oracle: a face is visible if, for some view, the ray from far away to its centroid
  // hits it first. Faces fully inside another part can never be.
  const TriangleBvh bvh(whole);
  const auto dirs = view_directions(162);
  for (std::size_t f = 0; f < whole.faces.size(); ++f) {
    const Vec3 c = face_centroid(whole, f);
    bool oracle = false;
    for (const Vec3& d : dirs) {
      std::size_t hit = 0;
      const double t = bvh.first_hit(c + 10.0 * d, -d, 0.0, &hit);
      if (std::isfinite(t) && std::abs(t - 10.0) < 1e-9 && (hit == f || face_normal(whole, hit).isApprox(face_normal(whole, f)))) {
        oracle = true;
        break;
      }
    }
    if (oracle) CHECK(visible[f] == 1);
    bool buried = false;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (static_cast<int>(k) == whole.labels[f]) continue;
      InsideTester inside(parts[k]);
      const Face& t = whole.faces[f];
      if (inside.inside(whole.vertices[t[0]]) && inside.inside(whole.vertices[t[1]]) && inside.inside(whole.vertices[t[2]]))
        buried = true;
    }
    if (buried) CHECK(visible[f] == 0);
  }
  // Leg tops are buried in the slab.
  CHECK(visible[12 + 6] == 0);
  CHECK(visible[12 + 7] == 0);
}

TEST_CASE("visibility cull is idempotent") {
  const TriMesh whole = merge_meshes(fixtures::table(0.1));
  const TriMesh once = visibility_cull(whole);
  const TriMesh twice = visibility_cull(once);
  CHECK(once.faces.size() < whole.faces.size());
  CHECK(twice.faces == once.faces);
  CHECK(twice.vertices == once.vertices);
}

TEST_CASE("mask assignment") {
  const TriMesh a = fixtures::box(Vec3(0, 0, 0), Vec3(1, 1, 1), 0.25);
  const TriMesh b = fixtures::box(Vec3(3, 0, 0), Vec3(4, 1, 1), 0.25);
  {
    const std::vector<TriMesh> parts = {a, b};
    const auto labels = assign_part_masks(a, parts);
    CHECK(std::all_of(labels.begin(), labels.end(), [](int l) { return l == 0; }));
  }
  {
    const std::vector<TriMesh> parts = {a, b};
    const TriMesh whole = merge_meshes(parts);
    CHECK(assign_part_masks(whole, parts) == whole.labels);
  }
  {
    // Centroid of the single whole face is equidistant to parts 1 and 2.
    TriMesh whole;
    whole.vertices = {Vec3(-0.1, 0, 0), Vec3(0.1, 0, 0), Vec3(0, 0.1, 0)};
    whole.faces = {{0, 1, 2}};
    const std::vector<TriMesh> parts = {fixtures::box(Vec3(10, 0, 0), Vec3(11, 1, 1)),
                                        fixtures::box(Vec3(-3, -1, -1), Vec3(-1, 1, 1)),
                                        fixtures::box(Vec3(1, -1, -1), Vec3(3, 1, 1))};
    whole.vertices = {Vec3(-0.1, -0.05, 0), Vec3(0.1, -0.05, 0), Vec3(0, 0.1, 0)};
    const Vec3 c = face_centroid(whole, 0);
    REQUIRE(std::abs(c.x()) < 1e-15);
    CHECK(assign_part_masks(whole, parts) == std::vector<int>{1});
  }
}

TEST_CASE("whole part pairs of two interpenetrating cubes") {
  const std::vector<TriMesh> raw = {fixtures::box(Vec3(0, 0, 0), Vec3(1, 1, 1)),
                                    fixtures::box(Vec3(0.5, 0.5, 0.5), Vec3(1.5, 1.5, 1.5))};
  PairOptions opts;
  opts.watertight.resolution = 48;
  const PartObject obj = make_whole_part_pairs("cubes", raw, opts);
  CHECK_NOTHROW(validate(obj));
  CHECK(obj.parts.size() == 2);
  CHECK(is_edge_manifold_closed(obj.whole));
  for (const TriMesh& p : obj.parts) CHECK(is_edge_manifold_closed(p));
  CHECK(std::count(obj.surface_masks.begin(), obj.surface_masks.end(), 0) > 0);
  CHECK(std::count(obj.surface_masks.begin(), obj.surface_masks.end(), 1) > 0);

  // The whole proxy encloses the union: points inside either normalized cube are inside it.
  const NormTransform t = unit_transform(bounding_box(merge_meshes(raw)));
  InsideTester whole_in(obj.whole);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const Vec3 q = t.invert(p);
    const bool in_a = (q.array() > 0.02).all() && (q.array() < 0.98).all();
    const bool in_b = (q.array() > 0.52).all() && (q.array() < 1.48).all();
    const bool far = (q.array() < -0.1).any() || (q.array() > 1.6).any();
    if (in_a || in_b) {
      CHECK(whole_in.inside(p));
      ++checked;
    }
    if (far) CHECK_FALSE(whole_in.inside(p));
  }
  CHECK(checked > 100);

  // Union of part surfaces covers the whole proxy within 2 UDF cells.
  const double cell = 2.0 / 48;
  std::vector<std::unique_ptr<TriangleBvh>> bvh;
  for (const TriMesh& p : obj.parts) bvh.push_back(std::make_unique<TriangleBvh>(p));
  for (std::size_t f = 0; f < obj.whole.faces.size(); f += 7) {
    const Vec3 c = face_centroid(obj.whole, f);
    double d = std::numeric_limits<double>::infinity();
    for (const auto& b : bvh) d = std::min(d, b->closest(c).distance());
    CHECK(d <= 2.0 * cell);
  }
}

TEST_CASE("single part pair matches its part proxy") {
  const std::vector<TriMesh> raw = {make_icosphere(Vec3(0, 0, 0), 1.0, 3)};
  PairOptions opts;
  opts.watertight.resolution = 40;
  const PartObject obj = make_whole_part_pairs("ball", raw, opts);
  KdTree tw(obj.whole.vertices), tp(obj.parts[0].vertices);
  double ab = 0, ba = 0;
  for (const Vec3& v : obj.whole.vertices) ab += std::sqrt(tp.nearest(v).distance_sq);
  for (const Vec3& v : obj.parts[0].vertices) ba += std::sqrt(tw.nearest(v).distance_sq);
  const double chamfer = 0.5 * (ab / obj.whole.vertices.size() + ba / obj.parts[0].vertices.size());
  CHECK(chamfer <= 2.0 * 2.0 / 40);
  CHECK(std::all_of(obj.surface_masks.begin(), obj.surface_masks.end(), [](int l) { return l == 0; }));
}

TEST_CASE("table pairs partition the whole faces into five masks") {
  PairOptions opts;
  opts.watertight.resolution = 64;
  const PartObject obj = make_whole_part_pairs("table", fixtures::table(), opts);
  CHECK(obj.parts.size() == 5);
  std::set<int> seen(obj.surface_masks.begin(), obj.surface_masks.end());
  CHECK(seen == std::set<int>{0, 1, 2, 3, 4});

  const auto dir = std::filesystem::temp_directory_path() / "holopart_tests" / "bundle";
  std::filesystem::remove_all(dir);
  save_part_object(obj, dir);
  const PartObject back = load_part_object(dir);
  CHECK(back.surface_masks == obj.surface_masks);
  CHECK(back.parts.size() == 5);
  CHECK(back.whole.faces == obj.whole.faces);
}

TEST_CASE("curation corpus verdicts") {
  const auto corpus = fixtures::curation_corpus();
  const auto decisions = curate(corpus);
  REQUIRE(decisions.size() == 6);
  const std::vector<Rule> expected = {Rule::none, Rule::none, Rule::mesh_count, Rule::components, Rule::dominance, Rule::none};
  for (std::size_t i = 0; i < 6; ++i) {
    INFO(decisions[i].id);
    CHECK(decisions[i].failed_rule == expected[i]);
    CHECK(decisions[i].pass == (expected[i] == Rule::none));
  }
  // Enumeration order does not matter.
  std::vector<RawObject> reversed(corpus.rbegin(), corpus.rend());
  const auto back = curate(reversed);
  for (std::size_t i = 0; i < 6; ++i) CHECK(back[5 - i].failed_rule == decisions[i].failed_rule);
}
