#include "supportseg/geometry.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <utility>

namespace supportseg {
namespace {

bool IsDegenerate(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const double scale = ab.squaredNorm() + ac.squaredNorm();
  return scale == 0.0 || ab.cross(ac).norm() <= 1e-12 * scale;
}

bool SegmentHitsTriangle(const Vec3& p, const Vec3& q, const std::array<Vec3, 3>& tri, Vec3* hit) {
  const Vec3 dir = q - p;
  const Vec3 e1 = tri[1] - tri[0];
  const Vec3 e2 = tri[2] - tri[0];
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) <= 1e-14 * dir.norm() * e1.norm() * e2.norm()) return false;
  const double inv = 1.0 / det;
  const Vec3 tvec = p - tri[0];
  const double u = tvec.dot(pvec) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  const double t = e2.dot(qvec) * inv;
  if (t < 0.0 || t > 1.0) return false;
  *hit = p + t * dir;
  return true;
}

double BoxDistance(const Eigen::AlignedBox3d& a, const Eigen::AlignedBox3d& b) {
  const Vec3 gap = (a.min() - b.max()).cwiseMax(b.min() - a.max()).cwiseMax(0.0);
  return gap.norm();
}

std::vector<Vec3> TransformPoints(const std::vector<Vec3>& points, const Transform& t) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const Vec3& p : points) out.push_back(t * p);
  return out;
}

// Minimum over triangle pairs; `a` and `b` live in the same frame.
ProximityResult PairwiseMinimum(const MeshBvh& a, const MeshBvh& b, bool accelerate) {
  ProximityResult best;
  best.distance = std::numeric_limits<double>::infinity();
  auto consider = [&](int ta, int tb) {
    ProximityResult r = TriangleTriangleDistance(a.Corners(ta), b.Corners(tb));
    if (r.distance < best.distance) best = r;
  };

  if (!accelerate) {
    for (std::size_t i = 0; i < a.triangle_count(); ++i)
      for (std::size_t j = 0; j < b.triangle_count(); ++j) consider(static_cast<int>(i), static_cast<int>(j));
    return best;
  }

  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [ia, ib] = stack.back();
    stack.pop_back();
    const MeshBvh::Node& na = a.nodes()[ia];
    const MeshBvh::Node& nb = b.nodes()[ib];
    if (BoxDistance(na.box, nb.box) >= best.distance) continue;
    if (na.leaf() && nb.leaf()) {
      for (int i = 0; i < na.count; ++i)
        for (int j = 0; j < nb.count; ++j) consider(a.order()[na.first + i], b.order()[nb.first + j]);
      if (best.distance == 0.0) break;
      continue;
    }
    // Descend into the larger node; push the farther child first so the nearer one is visited next.
    const bool split_a = !na.leaf() && (nb.leaf() || na.box.volume() >= nb.box.volume());
    std::pair<int, int> c1, c2;
    if (split_a) {
      c1 = {na.left, ib};
      c2 = {na.right, ib};
    } else {
      c1 = {ia, nb.left};
      c2 = {ia, nb.right};
    }
    const double d1 = BoxDistance(a.nodes()[c1.first].box, b.nodes()[c1.second].box);
    const double d2 = BoxDistance(a.nodes()[c2.first].box, b.nodes()[c2.second].box);
    if (d1 <= d2) {
      stack.push_back(c2);
      stack.push_back(c1);
    } else {
      stack.push_back(c1);
      stack.push_back(c2);
    }
  }
  return best;
}

ProximityResult Evaluate(const TriangleMesh& a_mesh, const MeshBvh& a, const TriangleMesh& b_mesh, const MeshBvh& b,
                         const ProximityOptions& options) {
  ProximityResult r = PairwiseMinimum(a, b, options.accelerate);
  if (r.distance > 0.0 && options.containment_is_contact) {
    const auto& ta = a_mesh.triangles();
    const auto& tb = b_mesh.triangles();
    if (b_mesh.IsClosed()) {
      const Vec3& probe = a.vertices()[ta.front()[0]];
      if (PointInsideClosedMesh(probe, b.vertices(), tb)) return {0.0, probe, probe};
    }
    if (a_mesh.IsClosed()) {
      const Vec3& probe = b.vertices()[tb.front()[0]];
      if (PointInsideClosedMesh(probe, a.vertices(), ta)) return {0.0, probe, probe};
    }
  }
  return r;
}

}  // namespace

TriangleMesh::TriangleMesh(std::vector<Vec3> vertices, std::vector<TriangleIndices> triangles)
    : vertices_(std::move(vertices)) {
  const int n = static_cast<int>(vertices_.size());
  triangles_.reserve(triangles.size());
  for (const TriangleIndices& t : triangles) {
    for (int idx : t) {
      if (idx < 0 || idx >= n)
        throw ValidationError("triangle index " + std::to_string(idx) + " out of range for " + std::to_string(n) +
                              " vertices");
    }
    if (IsDegenerate(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]])) continue;
    triangles_.push_back(t);
  }

  std::map<std::pair<int, int>, int> edge_use;
  for (const TriangleIndices& t : triangles_) {
    for (int k = 0; k < 3; ++k) {
      const int u = t[k];
      const int v = t[(k + 1) % 3];
      ++edge_use[{std::min(u, v), std::max(u, v)}];
    }
  }
  closed_ = !triangles_.empty() &&
            std::all_of(edge_use.begin(), edge_use.end(), [](const auto& e) { return e.second == 2; });
}

TriangleMesh TriangleMesh::Box(const Vec3& lo, const Vec3& hi) {
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) v.emplace_back(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(), i & 4 ? hi.z() : lo.z());
  std::vector<TriangleIndices> t = {
      {0, 2, 1}, {1, 2, 3},  // -z
      {4, 5, 6}, {5, 7, 6},  // +z
      {0, 1, 4}, {1, 5, 4},  // -y
      {2, 6, 3}, {3, 6, 7},  // +y
      {0, 4, 2}, {2, 4, 6},  // -x
      {1, 3, 5}, {3, 7, 5},  // +x
  };
  return TriangleMesh(std::move(v), std::move(t));
}

TriangleMesh TriangleMesh::Quad(double side, double z) {
  const double h = side / 2.0;
  return TriangleMesh({{-h, -h, z}, {h, -h, z}, {h, h, z}, {-h, h, z}}, {{0, 1, 2}, {0, 2, 3}});
}

Vec3 TriangleMesh::Centroid() const {
  std::vector<bool> used(vertices_.size(), false);
  for (const TriangleIndices& t : triangles_)
    for (int idx : t) used[idx] = true;
  Vec3 sum = Vec3::Zero();
  int count = 0;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (!used[i]) continue;
    sum += vertices_[i];
    ++count;
  }
  return count > 0 ? Vec3(sum / count) : Vec3::Zero();
}

std::array<Vec3, 3> TriangleMesh::Corners(std::size_t i) const {
  const TriangleIndices& t = triangles_[i];
  return {vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]};
}

PointTriangleResult ClosestPointOnTriangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  if (IsDegenerate(a, b, c)) throw ValidationError("degenerate triangle");
  auto make = [&](const Vec3& bary) {
    PointTriangleResult r;
    r.barycentric = bary;
    r.point = bary[0] * a + bary[1] * b + bary[2] * c;
    r.distance = (p - r.point).norm();
    return r;
  };

  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return make({1, 0, 0});

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return make({0, 1, 0});

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return make({1 - v, v, 0});
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return make({0, 0, 1});

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return make({1 - w, 0, w});
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return make({0, 1 - w, w});
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return make({1 - v - w, v, w});
}

SegmentPair ClosestPointsOnSegments(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1) {
  constexpr double kEps = 1e-18;
  const Vec3 d1 = p1 - p0;
  const Vec3 d2 = q1 - q0;
  const Vec3 r = p0 - q0;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0;
  double t = 0.0;
  if (a <= kEps && e <= kEps) {
    // both degenerate
  } else if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  SegmentPair out{p0 + s * d1, q0 + t * d2, 0.0};
  out.distance = (out.point_a - out.point_b).norm();
  return out;
}

ProximityResult TriangleTriangleDistance(const std::array<Vec3, 3>& a, const std::array<Vec3, 3>& b) {
  Vec3 hit;
  for (int i = 0; i < 3; ++i) {
    if (SegmentHitsTriangle(a[i], a[(i + 1) % 3], b, &hit)) return {0.0, hit, hit};
    if (SegmentHitsTriangle(b[i], b[(i + 1) % 3], a, &hit)) return {0.0, hit, hit};
  }

  ProximityResult best;
  best.distance = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    const PointTriangleResult ra = ClosestPointOnTriangle(a[i], b[0], b[1], b[2]);
    if (ra.distance < best.distance) best = {ra.distance, a[i], ra.point};
    const PointTriangleResult rb = ClosestPointOnTriangle(b[i], a[0], a[1], a[2]);
    if (rb.distance < best.distance) best = {rb.distance, rb.point, b[i]};
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const SegmentPair s = ClosestPointsOnSegments(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3]);
      if (s.distance < best.distance) best = {s.distance, s.point_a, s.point_b};
    }
  }
  return best;
}

MeshBvh::MeshBvh(std::vector<Vec3> vertices, std::vector<TriangleIndices> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  if (triangles_.empty()) return;
  order_.resize(triangles_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::vector<Vec3> centroids;
  centroids.reserve(triangles_.size());
  for (const TriangleIndices& t : triangles_)
    centroids.push_back((vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]]) / 3.0);
  nodes_.reserve(2 * triangles_.size());
  Build(0, static_cast<int>(triangles_.size()), centroids);
}

int MeshBvh::Build(int first, int count, std::vector<Vec3>& centroids) {
  constexpr int kLeafSize = 2;
  const int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroid_box;
  for (int i = first; i < first + count; ++i) {
    const TriangleIndices& t = triangles_[order_[i]];
    for (int idx : t) box.extend(vertices_[idx]);
    centroid_box.extend(centroids[order_[i]]);
  }
  nodes_[index].box = box;
  if (count <= kLeafSize) {
    nodes_[index].first = first;
    nodes_[index].count = count;
    return index;
  }
  int axis = 0;
  centroid_box.sizes().maxCoeff(&axis);
  const int half = count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + first + half, order_.begin() + first + count,
                   [&](int l, int r) {
                     if (centroids[l][axis] != centroids[r][axis]) return centroids[l][axis] < centroids[r][axis];
                     return l < r;
                   });
  const int left = Build(first, half, centroids);
  const int right = Build(first + half, count - half, centroids);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

std::array<Vec3, 3> MeshBvh::Corners(int i) const {
  const TriangleIndices& t = triangles_[i];
  return {vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]};
}

ProximityResult MeshMeshDistance(const TriangleMesh& a, const Transform& pose_a, const TriangleMesh& b,
                                 const Transform& pose_b, const ProximityOptions& options) {
  if (a.empty() || b.empty()) throw ValidationError("mesh distance requires non-empty meshes");
  // Work in a's local frame, then map the closest points back to world.
  const Transform rel = pose_a.inverse() * pose_b;
  const MeshBvh bvh_a(a.vertices(), a.triangles());
  const MeshBvh bvh_b(TransformPoints(b.vertices(), rel), b.triangles());
  ProximityResult r = Evaluate(a, bvh_a, b, bvh_b, options);
  r.point_a = pose_a * r.point_a;
  r.point_b = pose_a * r.point_b;
  return r;
}

MeshProximity::MeshProximity(TriangleMesh mesh, ProximityOptions options)
    : mesh_(std::move(mesh)), options_(options) {
  if (mesh_.empty()) throw ValidationError("proximity mesh is empty");
  bvh_ = MeshBvh(mesh_.vertices(), mesh_.triangles());
}

ProximityResult MeshProximity::Distance(const Transform& pose, const TriangleMesh& other,
                                        const Transform& other_pose) const {
  if (other.empty()) throw ValidationError("mesh distance requires non-empty meshes");
  const Transform rel = pose.inverse() * other_pose;
  const MeshBvh other_bvh(TransformPoints(other.vertices(), rel), other.triangles());
  // Report as (other, this) so point_a belongs to the query mesh.
  ProximityResult r = Evaluate(other, other_bvh, mesh_, bvh_, options_);
  r.point_a = pose * r.point_a;
  r.point_b = pose * r.point_b;
  return r;
}

bool PointInsideClosedMesh(const Vec3& p, std::span<const Vec3> vertices, std::span<const TriangleIndices> triangles) {
  const Vec3 dir = Vec3(0.5377, 0.3217, 0.7796).normalized();
  int crossings = 0;
  for (const TriangleIndices& t : triangles) {
    const Vec3& v0 = vertices[t[0]];
    const Vec3 e1 = vertices[t[1]] - v0;
    const Vec3 e2 = vertices[t[2]] - v0;
    const Vec3 pvec = dir.cross(e2);
    const double det = e1.dot(pvec);
    if (std::abs(det) < 1e-14 * e1.norm() * e2.norm()) continue;
    const double inv = 1.0 / det;
    const Vec3 tvec = p - v0;
    const double u = tvec.dot(pvec) * inv;
    if (u < 0.0 || u >= 1.0) continue;
    const Vec3 qvec = tvec.cross(e1);
    const double v = dir.dot(qvec) * inv;
    if (v < 0.0 || u + v >= 1.0) continue;
    if (e2.dot(qvec) * inv > 0.0) ++crossings;
  }
  return crossings % 2 == 1;
}

}  // namespace supportseg
