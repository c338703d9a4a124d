#pragma once

#include <array>
#include <span>
#include <vector>

#include "supportseg/common.hpp"

namespace supportseg {

using TriangleIndices = std::array<int, 3>;

// Indexed triangle mesh in millimetres. Degenerate (zero-area) triangles are
// dropped at construction; out-of-range indices are rejected.
class TriangleMesh {
 public:
  TriangleMesh() = default;
  TriangleMesh(std::vector<Vec3> vertices, std::vector<TriangleIndices> triangles);

  // Axis-aligned box with 12 outward-facing triangles.
  static TriangleMesh Box(const Vec3& min_corner, const Vec3& max_corner);
  // Horizontal square of the given side length at height z, two triangles facing +z.
  static TriangleMesh Quad(double side, double z = 0.0);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<TriangleIndices>& triangles() const { return triangles_; }
  bool empty() const { return triangles_.empty(); }
  std::size_t size() const { return triangles_.size(); }

  // Mean of the referenced vertices.
  Vec3 Centroid() const;
  // Every edge is shared by exactly two triangles.
  bool IsClosed() const { return closed_; }
  std::array<Vec3, 3> Corners(std::size_t triangle) const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<TriangleIndices> triangles_;
  bool closed_ = false;
};

struct PointTriangleResult {
  double distance = 0.0;
  Vec3 point = Vec3::Zero();
  Vec3 barycentric = Vec3::Zero();  // weights of (a, b, c)
};

// Throws ValidationError for a degenerate triangle.
PointTriangleResult ClosestPointOnTriangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct ProximityResult {
  double distance = 0.0;
  Vec3 point_a = Vec3::Zero();
  Vec3 point_b = Vec3::Zero();
};

struct SegmentPair {
  Vec3 point_a;
  Vec3 point_b;
  double distance;
};

SegmentPair ClosestPointsOnSegments(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1);

// Exact minimum distance between two triangles; 0 when they intersect.
ProximityResult TriangleTriangleDistance(const std::array<Vec3, 3>& a, const std::array<Vec3, 3>& b);

// Axis-aligned bounding volume hierarchy over a mesh whose vertices have
// already been placed in a common frame.
class MeshBvh {
 public:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1;
    int right = -1;
    int first = 0;  // into order()
    int count = 0;  // >0 for leaves
    bool leaf() const { return count > 0; }
  };

  MeshBvh() = default;
  MeshBvh(std::vector<Vec3> vertices, std::vector<TriangleIndices> triangles);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& order() const { return order_; }
  const std::vector<Vec3>& vertices() const { return vertices_; }
  std::array<Vec3, 3> Corners(int triangle) const;
  std::size_t triangle_count() const { return triangles_.size(); }

 private:
  int Build(int first, int count, std::vector<Vec3>& centroids);

  std::vector<Vec3> vertices_;
  std::vector<TriangleIndices> triangles_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

struct ProximityOptions {
  bool accelerate = true;
  // A vertex of one mesh strictly inside the other (closed) mesh reports distance 0.
  bool containment_is_contact = true;
};

// Minimum distance between two posed meshes; closest points are in world frame.
// Interpenetration reports distance 0. Throws ValidationError on empty meshes.
ProximityResult MeshMeshDistance(const TriangleMesh& a, const Transform& pose_a, const TriangleMesh& b,
                                 const Transform& pose_b, const ProximityOptions& options = {});

// Distance query against a mesh whose hierarchy is built once in its local frame.
// The other mesh is moved into that frame per query, so only the (small) query
// mesh hierarchy is rebuilt.
class MeshProximity {
 public:
  explicit MeshProximity(TriangleMesh mesh, ProximityOptions options = {});

  const TriangleMesh& mesh() const { return mesh_; }

  ProximityResult Distance(const Transform& pose, const TriangleMesh& other, const Transform& other_pose) const;

 private:
  TriangleMesh mesh_;
  MeshBvh bvh_;
  ProximityOptions options_;
};

// Parity test along a fixed ray; meaningful for closed meshes only.
bool PointInsideClosedMesh(const Vec3& p, std::span<const Vec3> vertices, std::span<const TriangleIndices> triangles);

}  // namespace supportseg
