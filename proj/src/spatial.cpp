#include "holopart/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace holopart {

double ClosestHit::distance() const { return std::sqrt(distance_sq); }

// Ericson, Real-Time Collision Detection, 5.1.5.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

namespace {

double box_distance_sq(const AABB& box, const Vec3& p) {
  const Vec3 d = (box.min - p).cwiseMax(p - box.max).cwiseMax(Vec3::Zero());
  return d.squaredNorm();
}

// Slab test; returns entry distance or +inf.
double ray_box(const AABB& box, const Vec3& origin, const Vec3& inv_dir, double t_max) {
  double t0 = 0.0, t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    double ta = (box.min[a] - origin[a]) * inv_dir[a];
    double tb = (box.max[a] - origin[a]) * inv_dir[a];
    if (ta > tb) std::swap(ta, tb);
    if (std::isnan(ta) || std::isnan(tb)) continue;  // origin on a slab plane with zero direction
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::numeric_limits<double>::infinity();
  }
  return t0;
}

// Moller-Trumbore; returns t or +inf.
double ray_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pv = d.cross(e2);
  const double det = e1.dot(pv);
  if (std::abs(det) < 1e-300) return std::numeric_limits<double>::infinity();
  const double inv = 1.0 / det;
  const Vec3 tv = o - a;
  const double u = tv.dot(pv) * inv;
  if (u < 0.0 || u > 1.0) return std::numeric_limits<double>::infinity();
  const Vec3 qv = tv.cross(e1);
  const double v = d.dot(qv) * inv;
  if (v < 0.0 || u + v > 1.0) return std::numeric_limits<double>::infinity();
  return e2.dot(qv) * inv;
}

}  // namespace

TriangleBvh::TriangleBvh(const TriMesh& mesh) : mesh_(mesh) {
  const auto n = static_cast<std::uint32_t>(mesh.faces.size());
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0u);
  std::vector<Vec3> centroids(n);
  for (std::uint32_t f = 0; f < n; ++f) centroids[f] = face_centroid(mesh, f);
  nodes_.reserve(2 * n + 1);
  if (n > 0) build(0, n, centroids);
}

std::uint32_t TriangleBvh::build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  AABB box{Vec3::Constant(std::numeric_limits<double>::infinity()),
           Vec3::Constant(-std::numeric_limits<double>::infinity())};
  AABB cbox = box;
  for (std::uint32_t i = begin; i < end; ++i) {
    for (auto v : mesh_.faces[order_[i]]) box.expand(mesh_.vertices[v]);
    cbox.expand(centroids[order_[i]]);
  }
  nodes_[id].box = box;
  constexpr std::uint32_t kLeafSize = 4;
  if (end - begin <= kLeafSize) {
    nodes_[id].first = begin;
    nodes_[id].count = end - begin;
    return id;
  }
  int axis = 0;
  cbox.extent().maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (centroids[a][axis] != centroids[b][axis]) return centroids[a][axis] < centroids[b][axis];
                     return a < b;
                   });
  const std::uint32_t left = build(begin, mid, centroids);
  const std::uint32_t right = build(mid, end, centroids);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

ClosestHit TriangleBvh::closest(const Vec3& p) const {
  return closest(p, std::numeric_limits<double>::infinity());
}

ClosestHit TriangleBvh::closest(const Vec3& p, double max_distance_sq) const {
  ClosestHit best;
  best.distance_sq = max_distance_sq;
  bool found = false;
  if (nodes_.empty()) return ClosestHit{};
  struct Item {
    std::uint32_t node;
    double dist;
  };
  Item stack[128];
  int top = 0;
  stack[top++] = {0, box_distance_sq(nodes_[0].box, p)};
  while (top > 0) {
    const Item item = stack[--top];
    if (item.dist > best.distance_sq) continue;
    const Node& node = nodes_[item.node];
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const std::uint32_t f = order_[i];
        const Face& t = mesh_.faces[f];
        const Vec3 q = closest_point_on_triangle(p, mesh_.vertices[t[0]], mesh_.vertices[t[1]], mesh_.vertices[t[2]]);
        const double d = (q - p).squaredNorm();
        if (d < best.distance_sq || (d == best.distance_sq && (!found || f < best.face))) {
          best.distance_sq = d;
          best.face = f;
          best.point = q;
          found = true;
        }
      }
      continue;
    }
    const double dl = box_distance_sq(nodes_[node.left].box, p);
    const double dr = box_distance_sq(nodes_[node.right].box, p);
    // Nearer child is expanded first.
    if (dl <= dr) {
      stack[top++] = {node.right, dr};
      stack[top++] = {node.left, dl};
    } else {
      stack[top++] = {node.left, dl};
      stack[top++] = {node.right, dr};
    }
  }
  if (!found) return ClosestHit{};
  return best;
}

template <typename Visit>
void TriangleBvh::ray_walk(const Vec3& origin, const Vec3& dir, double t_max, Visit&& visit) const {
  if (nodes_.empty()) return;
  const Vec3 inv = dir.cwiseInverse();
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!std::isfinite(ray_box(node.box, origin, inv, t_max))) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const std::uint32_t f = order_[i];
        const Face& t = mesh_.faces[f];
        const double hit = ray_triangle(origin, dir, mesh_.vertices[t[0]], mesh_.vertices[t[1]], mesh_.vertices[t[2]]);
        if (std::isfinite(hit)) t_max = std::min(t_max, visit(hit, f));
      }
      continue;
    }
    stack[top++] = node.left;
    stack[top++] = node.right;
  }
}

double TriangleBvh::first_hit(const Vec3& origin, const Vec3& dir, double t_min, std::size_t* face) const {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_face = 0;
  ray_walk(origin, dir, best, [&](double t, std::uint32_t f) {
    if (t > t_min && (t < best || (t == best && f < best_face))) {
      best = t;
      best_face = f;
    }
    return best;
  });
  if (face) *face = best_face;
  return best;
}

std::size_t TriangleBvh::crossings(const Vec3& origin, const Vec3& dir) const {
  std::size_t count = 0;
  ray_walk(origin, dir, std::numeric_limits<double>::infinity(), [&](double t, std::uint32_t) {
    if (t > 0.0) ++count;
    return std::numeric_limits<double>::infinity();
  });
  return count;
}

bool InsideTester::inside(const Vec3& p) const {
  // Irrational-ish directions make edge and vertex grazing hits vanishingly rare.
  static const Vec3 dirs[3] = {Vec3(0.5773, 0.5891, 0.5654).normalized(), Vec3(-0.6128, 0.4417, -0.6552).normalized(),
                               Vec3(0.3312, -0.8761, 0.3502).normalized()};
  int votes = 0;
  for (const Vec3& d : dirs) votes += static_cast<int>(bvh_.crossings(p, d) % 2);
  return votes >= 2;
}

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  index_.resize(points_.size());
  std::iota(index_.begin(), index_.end(), 0u);
  if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()));
  std::vector<Vec3> reordered(points_.size());
  for (std::size_t i = 0; i < index_.size(); ++i) reordered[i] = points_[index_[i]];
  points_ = std::move(reordered);
}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({begin, end, 0, 0, -1, 0.0});
  constexpr std::uint32_t kLeafSize = 8;
  if (end - begin <= kLeafSize) return id;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[index_[i]]);
    hi = hi.cwiseMax(points_[index_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[index_[mid]][axis];
  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

KdTree::Result KdTree::nearest(const Vec3& q) const {
  Result best;
  if (!nodes_.empty()) search(0, q, best);
  return best;
}

void KdTree::search(std::uint32_t id, const Vec3& q, Result& best) const {
  const Node& node = nodes_[id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const double d = (points_[i] - q).squaredNorm();
      if (d < best.distance_sq || (d == best.distance_sq && index_[i] < best.index)) {
        best.distance_sq = d;
        best.index = index_[i];
      }
    }
    return;
  }
  // Left subtree holds coordinates <= split, right holds >= split.
  const double diff = q[node.axis] - node.split;
  const std::uint32_t near = diff <= 0.0 ? node.left : node.right;
  const std::uint32_t far = diff <= 0.0 ? node.right : node.left;
  search(near, q, best);
  if (diff * diff <= best.distance_sq) search(far, q, best);
}

}  // namespace holopart
