#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "supportseg/common.hpp"
#include "supportseg/geometry.hpp"

namespace supportseg {

// Support-candidate body parts, laterality collapsed.
enum class SegmentClass { kFoot, kHand, kKnee, kElbow };

enum class Side { kLeft, kRight };

// Class of a canonical support segment name (LeftFoot, RightKnee, ...).
std::optional<SegmentClass> SupportSegmentClass(std::string_view segment_name);
std::optional<Side> SupportSegmentSide(std::string_view segment_name);
std::string_view SegmentClassName(SegmentClass c);

enum class JointType { kRevolute, kFixed };

struct Joint {
  std::string name;
  std::string parent;  // segment
  std::string child;   // segment
  JointType type = JointType::kRevolute;
  Vec3 axis = Vec3::UnitZ();
  Vec3 offset = Vec3::Zero();  // mm, in the parent segment frame
  double lower = 0.0;          // rad
  double upper = 0.0;
};

struct Segment {
  std::string name;
  std::string parent_joint;  // empty for the root
  TriangleMesh mesh;         // local frame, mm
  bool support = false;
};

struct MarkerAttachment {
  std::string name;
  std::string segment;
  Vec3 offset = Vec3::Zero();  // mm, segment frame
};

// Root pose followed by one angle per revolute joint, in model joint order.
// Flattened layout: (px, py, pz, alpha, beta, gamma, theta_1 .. theta_m).
struct PoseVector {
  Vec3 root_position = Vec3::Zero();
  Vec3 root_rotation = Vec3::Zero();  // intrinsic x-y-z Euler angles
  Eigen::VectorXd joint_angles;

  static PoseVector FromFlat(std::span<const double> values, std::size_t joint_count);
  Eigen::VectorXd Flat() const;
  std::size_t size() const { return 6 + static_cast<std::size_t>(joint_angles.size()); }

  Transform RootTransform() const;
};

// Articulated tree of segments connected by single-axis revolute (or fixed)
// joints. Immutable once built.
class KinematicModel {
 public:
  // Validates the tree; throws ValidationError on any violated invariant.
  KinematicModel(std::string name, std::vector<Segment> segments, std::vector<Joint> joints,
                 std::vector<MarkerAttachment> markers);

  const std::string& name() const { return name_; }
  const std::vector<Segment>& segments() const { return segments_; }
  // Parent-before-child order.
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<MarkerAttachment>& markers() const { return markers_; }

  const Segment& root() const { return segments_[root_]; }
  std::size_t root_index() const { return root_; }

  // Number of revolute joints (m); the pose vector has 6 + m entries.
  std::size_t joint_count() const { return revolute_.size(); }
  std::size_t dof() const { return 6 + joint_count(); }
  // Revolute joints in pose order.
  const Joint& revolute_joint(std::size_t k) const { return joints_[revolute_[k]]; }

  std::optional<std::size_t> FindSegment(std::string_view name) const;
  std::size_t SegmentIndex(std::string_view name) const;  // throws if absent
  std::size_t MarkerSegment(std::size_t marker) const { return marker_segment_[marker]; }
  std::vector<std::size_t> SupportSegments() const;

  // Pose-vector indices (>= 6) of revolute joints between the root and a segment.
  const std::vector<std::size_t>& AncestorDofs(std::size_t segment) const { return ancestor_dofs_[segment]; }

  // Zero root pose; joint angles at zero clamped into limits.
  PoseVector NeutralPose() const;
  // Per pose-vector entry bounds; root entries are unbounded.
  std::vector<double> LowerBounds() const;
  std::vector<double> UpperBounds() const;
  bool WithinLimits(const PoseVector& pose) const;
  void ClampToLimits(PoseVector& pose) const;

  // World transforms indexed by segment; `params` is the flattened pose.
  void ForwardKinematicsInto(std::span<const double> params, std::vector<Transform>& out) const;

 private:
  std::string name_;
  std::vector<Segment> segments_;
  std::vector<Joint> joints_;
  std::vector<MarkerAttachment> markers_;
  std::size_t root_ = 0;
  std::vector<std::size_t> revolute_;      // joint index per revolute dof
  std::vector<int> joint_dof_;             // pose index per joint, -1 for fixed
  std::vector<std::size_t> joint_parent_;  // segment index
  std::vector<std::size_t> joint_child_;
  std::vector<std::size_t> marker_segment_;
  std::vector<std::vector<std::size_t>> ancestor_dofs_;
  std::unordered_map<std::string, std::size_t> segment_lookup_;
};

// Segment-name keyed result of forward kinematics.
class SegmentPoses {
 public:
  SegmentPoses(const KinematicModel& model, std::vector<Transform> transforms)
      : model_(&model), transforms_(std::move(transforms)) {}

  const Transform& at(std::string_view segment) const { return transforms_[model_->SegmentIndex(segment)]; }
  const Transform& operator[](std::size_t index) const { return transforms_[index]; }
  const std::vector<Transform>& all() const { return transforms_; }
  std::size_t size() const { return transforms_.size(); }

 private:
  const KinematicModel* model_;
  std::vector<Transform> transforms_;
};

// Throws ValidationError when the pose length is not 6 + m.
SegmentPoses ForwardKinematics(const KinematicModel& model, const PoseVector& pose);

// V(x): one position per marker attachment, in attachment order.
std::vector<Vec3> VirtualMarkerPositions(const KinematicModel& model, const PoseVector& pose);
void VirtualMarkerPositionsInto(const KinematicModel& model, const std::vector<Transform>& segment_poses,
                                std::vector<Vec3>& out);

}  // namespace supportseg
