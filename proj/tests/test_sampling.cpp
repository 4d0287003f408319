#include "holopart/primitives.hpp"
#include "holopart/sampling.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace holopart;
using namespace holopart::sampling;

namespace {

std::vector<std::size_t> greedy_fps_oracle(const std::vector<Vec3>& pts, std::size_t m, std::size_t first) {
  std::vector<std::size_t> out{first};
  while (out.size() < m) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t s : out) d = std::min(d, (pts[i] - pts[s]).squaredNorm());
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace

TEST_CASE("surface samples lie on faces with unit normals") {
  const TriMesh box = make_box({Vec3(0, 0, 0), Vec3(2, 1, 1)});
  const SurfaceSamples s = sample_surface_tracked(box, 2000, 42);
  REQUIRE(s.cloud.size() == 2000);
  for (std::size_t i = 0; i < s.cloud.size(); ++i) {
    CHECK(std::abs(s.cloud.normals[i].norm() - 1.0) <= 1e-6);
    CHECK(s.cloud.normals[i].isApprox(face_normal(box, s.source_faces[i])));
    const Vec3& p = s.cloud.positions[i];
    const Vec3 n = s.cloud.normals[i];
    const Vec3 a = box.vertices[box.faces[s.source_faces[i]][0]];
    CHECK(std::abs(n.dot(p - a)) < 1e-12);
  }
  const SurfaceSamples again = sample_surface_tracked(box, 2000, 42);
  CHECK(again.cloud.positions == s.cloud.positions);
}

TEST_CASE("surface sampling is area weighted") {
  // Box 2 x 1 x 1: the two 1x1 end faces hold 2/10 of the area.
  const TriMesh box = make_box({Vec3(0, 0, 0), Vec3(2, 1, 1)});
  const std::size_t n = 20000;
  const PointCloud c = sample_surface(box, n, 9);
  std::array<std::size_t, 6> bins{};
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& nrm = c.normals[i];
    int axis = 0;
    nrm.cwiseAbs().maxCoeff(&axis);
    bins[axis * 2 + (nrm[axis] > 0 ? 1 : 0)]++;
  }
  const std::array<double, 6> p = {0.1, 0.1, 0.2, 0.2, 0.2, 0.2};
  double chi2 = 0.0;
  for (int b = 0; b < 6; ++b) {
    const double e = p[b] * n;
    chi2 += (bins[b] - e) * (bins[b] - e) / e;
    CHECK(std::abs(bins[b] - e) <= 3.0 * std::sqrt(e * (1.0 - p[b])));
  }
  CHECK(chi2 < 20.5);  // 5 dof, p ~ 0.001
}

TEST_CASE("fps agrees with the greedy oracle") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts(300);
  for (Vec3& p : pts) p = Vec3(u(rng), u(rng), u(rng));

  const auto a = fps(std::span<const Vec3>(pts), 40, 0);
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : pts) centroid += p;
  centroid /= pts.size();
  std::size_t first = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if ((pts[i] - centroid).squaredNorm() < (pts[first] - centroid).squaredNorm()) first = i;
  CHECK(a == greedy_fps_oracle(pts, 40, first));

  const auto b = fps(std::span<const Vec3>(pts), 40, 1234);
  CHECK(b == greedy_fps_oracle(pts, 40, b[0]));
  CHECK(fps(std::span<const Vec3>(pts), 40, 1234) == b);
}

TEST_CASE("fps small cases") {
  const std::vector<Vec3> line = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0), Vec3(4, 0, 0)};
  // Centroid is x = 2; then the ends, lower index first on ties.
  CHECK(fps(std::span<const Vec3>(line), 3, 0) == std::vector<std::size_t>{2, 0, 4});
  CHECK(fps(std::span<const Vec3>(line), 5, 0).size() == 5);
  CHECK_THROWS_AS(fps(std::span<const Vec3>(line), 6, 0), InputError);
  // Duplicates: all distances zero, picks lowest unselected index.
  const std::vector<Vec3> same(4, Vec3(1, 1, 1));
  CHECK(fps(std::span<const Vec3>(same), 4, 0) == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("masked whole and masks from faces") {
  const std::vector<TriMesh> parts = {make_box({Vec3(0, 0, 0), Vec3(1, 1, 1)}),
                                      make_box({Vec3(2, 0, 0), Vec3(3, 1, 1)})};
  const TriMesh whole = merge_meshes(parts);
  const SurfaceSamples s = sample_surface_tracked(whole, 1000, 3);
  const auto mask = mask_from_faces(whole, s.source_faces, 1);
  for (std::size_t i = 0; i < mask.size(); ++i) CHECK((mask[i] == 1) == (s.cloud.positions[i].x() > 1.5));
  const FeaturedPoints f = build_masked_whole(s.cloud, mask);
  REQUIRE(f.extra.has_value());
  CHECK(f.extra->size() == 1000);
  std::vector<std::uint8_t> short_mask(10, 1);
  CHECK_THROWS_AS(build_masked_whole(s.cloud, short_mask), InputError);
}

TEST_CASE("part local frame spans the unit box") {
  const TriMesh part = make_box({Vec3(2, 3, 4), Vec3(2.5, 3.2, 4.1)});
  const PointCloud pts = sample_surface(part, 500, 1);
  const LocalFrame lf = part_in_local_frame(pts);
  const AABB b = bounding_box(std::span<const Vec3>(lf.points.positions));
  CHECK(b.extent().maxCoeff() == doctest::Approx(2.0));
  CHECK(b.center().norm() < 1e-12);
  for (std::size_t i = 0; i < pts.size(); ++i)
    CHECK((lf.transform.invert(lf.points.positions[i]) - pts.positions[i]).norm() < 1e-9);
}
