#include "supportseg/kinematic_model.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <unordered_set>

namespace supportseg {
namespace {

struct CanonicalSupport {
  std::string_view name;
  SegmentClass cls;
  Side side;
};

constexpr CanonicalSupport kCanonical[] = {
    {"LeftFoot", SegmentClass::kFoot, Side::kLeft},     {"RightFoot", SegmentClass::kFoot, Side::kRight},
    {"LeftHand", SegmentClass::kHand, Side::kLeft},     {"RightHand", SegmentClass::kHand, Side::kRight},
    {"LeftKnee", SegmentClass::kKnee, Side::kLeft},     {"RightKnee", SegmentClass::kKnee, Side::kRight},
    {"LeftElbow", SegmentClass::kElbow, Side::kLeft},   {"RightElbow", SegmentClass::kElbow, Side::kRight},
};

const CanonicalSupport* FindCanonical(std::string_view name) {
  for (const CanonicalSupport& c : kCanonical)
    if (c.name == name) return &c;
  return nullptr;
}

}  // namespace

std::optional<SegmentClass> SupportSegmentClass(std::string_view name) {
  if (const CanonicalSupport* c = FindCanonical(name)) return c->cls;
  return std::nullopt;
}

std::optional<Side> SupportSegmentSide(std::string_view name) {
  if (const CanonicalSupport* c = FindCanonical(name)) return c->side;
  return std::nullopt;
}

std::string_view SegmentClassName(SegmentClass c) {
  switch (c) {
    case SegmentClass::kFoot: return "Feet";
    case SegmentClass::kHand: return "Hands";
    case SegmentClass::kKnee: return "Knees";
    case SegmentClass::kElbow: return "Elbows";
  }
  return "";
}

PoseVector PoseVector::FromFlat(std::span<const double> values, std::size_t joint_count) {
  if (values.size() != 6 + joint_count)
    throw ValidationError("pose vector has " + std::to_string(values.size()) + " entries, expected " +
                          std::to_string(6 + joint_count));
  PoseVector p;
  p.root_position = Vec3(values[0], values[1], values[2]);
  p.root_rotation = Vec3(values[3], values[4], values[5]);
  p.joint_angles = Eigen::Map<const Eigen::VectorXd>(values.data() + 6, static_cast<Eigen::Index>(joint_count));
  return p;
}

Eigen::VectorXd PoseVector::Flat() const {
  Eigen::VectorXd v(size());
  v.head<3>() = root_position;
  v.segment<3>(3) = root_rotation;
  v.tail(joint_angles.size()) = joint_angles;
  return v;
}

Transform PoseVector::RootTransform() const {
  Transform t = Transform::Identity();
  t.translation() = root_position;
  t.linear() = RotationFromEulerXYZ(root_rotation.x(), root_rotation.y(), root_rotation.z());
  return t;
}

KinematicModel::KinematicModel(std::string name, std::vector<Segment> segments, std::vector<Joint> joints,
                               std::vector<MarkerAttachment> markers)
    : name_(std::move(name)), segments_(std::move(segments)), markers_(std::move(markers)) {
  if (segments_.empty()) throw ValidationError("model has no segments");
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& s = segments_[i];
    if (s.name.empty()) throw ValidationError("segment " + std::to_string(i) + " has no name");
    if (!segment_lookup_.emplace(s.name, i).second) throw ValidationError("duplicate segment '" + s.name + "'");
    if (s.support) {
      if (!SupportSegmentClass(s.name))
        throw ValidationError("support segment '" + s.name + "' is not a canonical support name");
      if (s.mesh.empty()) throw ValidationError("support segment '" + s.name + "' has no collision mesh");
    }
  }

  std::unordered_set<std::string> joint_names;
  std::vector<int> parent_joint_of(segments_.size(), -1);
  for (std::size_t j = 0; j < joints.size(); ++j) {
    const Joint& jt = joints[j];
    if (!joint_names.insert(jt.name).second) throw ValidationError("duplicate joint '" + jt.name + "'");
    const auto parent = FindSegment(jt.parent);
    const auto child = FindSegment(jt.child);
    if (!parent) throw ValidationError("joint '" + jt.name + "' references unknown parent segment '" + jt.parent + "'");
    if (!child) throw ValidationError("joint '" + jt.name + "' references unknown child segment '" + jt.child + "'");
    if (*parent == *child) throw ValidationError("joint '" + jt.name + "' connects a segment to itself");
    if (parent_joint_of[*child] >= 0)
      throw ValidationError("segment '" + jt.child + "' has more than one parent joint");
    parent_joint_of[*child] = static_cast<int>(j);
    if (jt.lower > jt.upper)
      throw ValidationError("joint '" + jt.name + "' has lower limit above upper limit");
    if (jt.type == JointType::kRevolute && std::abs(jt.axis.norm() - 1.0) > 1e-9)
      throw ValidationError("joint '" + jt.name + "' axis is not unit length");
  }

  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    Segment& s = segments_[i];
    const std::string derived = parent_joint_of[i] >= 0 ? joints[parent_joint_of[i]].name : std::string();
    if (!s.parent_joint.empty() && s.parent_joint != derived)
      throw ValidationError("segment '" + s.name + "' declares parent joint '" + s.parent_joint +
                            "' which does not attach it");
    s.parent_joint = derived;
    if (derived.empty()) roots.push_back(i);
  }
  if (roots.size() != 1)
    throw ValidationError("joint hierarchy must have exactly one root segment, found " + std::to_string(roots.size()));
  root_ = roots.front();

  // Breadth-first from the root; joints keep declaration order among siblings.
  std::vector<std::vector<std::size_t>> children(segments_.size());
  for (std::size_t j = 0; j < joints.size(); ++j) children[segment_lookup_.at(joints[j].parent)].push_back(j);
  std::deque<std::size_t> queue{root_};
  std::vector<bool> reached(segments_.size(), false);
  reached[root_] = true;
  ancestor_dofs_.assign(segments_.size(), {});
  while (!queue.empty()) {
    const std::size_t seg = queue.front();
    queue.pop_front();
    for (std::size_t j : children[seg]) {
      const std::size_t child = segment_lookup_.at(joints[j].child);
      if (reached[child]) throw ValidationError("joint hierarchy contains a cycle at '" + joints[j].child + "'");
      reached[child] = true;
      const std::size_t index = joints_.size();
      joints_.push_back(joints[j]);
      joint_parent_.push_back(seg);
      joint_child_.push_back(child);
      ancestor_dofs_[child] = ancestor_dofs_[seg];
      if (joints[j].type == JointType::kRevolute) {
        joint_dof_.push_back(static_cast<int>(6 + revolute_.size()));
        ancestor_dofs_[child].push_back(6 + revolute_.size());
        revolute_.push_back(index);
      } else {
        joint_dof_.push_back(-1);
      }
      queue.push_back(child);
    }
  }
  for (std::size_t i = 0; i < segments_.size(); ++i)
    if (!reached[i]) throw ValidationError("segment '" + segments_[i].name + "' is not connected to the root");

  std::unordered_set<std::string> marker_names;
  for (const MarkerAttachment& m : markers_) {
    if (!marker_names.insert(m.name).second) throw ValidationError("duplicate marker '" + m.name + "'");
    const auto seg = FindSegment(m.segment);
    if (!seg) throw ValidationError("marker '" + m.name + "' references unknown segment '" + m.segment + "'");
    marker_segment_.push_back(*seg);
  }
}

std::optional<std::size_t> KinematicModel::FindSegment(std::string_view name) const {
  const auto it = segment_lookup_.find(std::string(name));
  if (it == segment_lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t KinematicModel::SegmentIndex(std::string_view name) const {
  if (const auto idx = FindSegment(name)) return *idx;
  throw ValidationError("unknown segment '" + std::string(name) + "'");
}

std::vector<std::size_t> KinematicModel::SupportSegments() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < segments_.size(); ++i)
    if (segments_[i].support) out.push_back(i);
  return out;
}

PoseVector KinematicModel::NeutralPose() const {
  PoseVector p;
  p.joint_angles = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(joint_count()));
  ClampToLimits(p);
  return p;
}

std::vector<double> KinematicModel::LowerBounds() const {
  std::vector<double> lb(dof(), -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < joint_count(); ++k) lb[6 + k] = revolute_joint(k).lower;
  return lb;
}

std::vector<double> KinematicModel::UpperBounds() const {
  std::vector<double> ub(dof(), std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < joint_count(); ++k) ub[6 + k] = revolute_joint(k).upper;
  return ub;
}

bool KinematicModel::WithinLimits(const PoseVector& pose) const {
  if (pose.size() != dof()) return false;
  for (std::size_t k = 0; k < joint_count(); ++k) {
    const double v = pose.joint_angles[static_cast<Eigen::Index>(k)];
    if (v < revolute_joint(k).lower || v > revolute_joint(k).upper) return false;
  }
  return true;
}

void KinematicModel::ClampToLimits(PoseVector& pose) const {
  for (std::size_t k = 0; k < joint_count() && k < static_cast<std::size_t>(pose.joint_angles.size()); ++k) {
    double& v = pose.joint_angles[static_cast<Eigen::Index>(k)];
    v = std::clamp(v, revolute_joint(k).lower, revolute_joint(k).upper);
  }
}

void KinematicModel::ForwardKinematicsInto(std::span<const double> params, std::vector<Transform>& out) const {
  if (params.size() != dof())
    throw ValidationError("pose vector has " + std::to_string(params.size()) + " entries, model expects " +
                          std::to_string(dof()));
  out.resize(segments_.size());
  Transform& root = out[root_];
  root.setIdentity();
  root.translation() = Vec3(params[0], params[1], params[2]);
  root.linear() = RotationFromEulerXYZ(params[3], params[4], params[5]);
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    const Joint& jt = joints_[j];
    Transform local = Transform::Identity();
    local.translation() = jt.offset;
    if (joint_dof_[j] >= 0) local.linear() = Eigen::AngleAxisd(params[joint_dof_[j]], jt.axis).toRotationMatrix();
    out[joint_child_[j]] = out[joint_parent_[j]] * local;
  }
}

SegmentPoses ForwardKinematics(const KinematicModel& model, const PoseVector& pose) {
  std::vector<Transform> transforms;
  const Eigen::VectorXd flat = pose.Flat();
  model.ForwardKinematicsInto(std::span<const double>(flat.data(), static_cast<std::size_t>(flat.size())), transforms);
  return SegmentPoses(model, std::move(transforms));
}

void VirtualMarkerPositionsInto(const KinematicModel& model, const std::vector<Transform>& segment_poses,
                                std::vector<Vec3>& out) {
  const auto& markers = model.markers();
  out.resize(markers.size());
  for (std::size_t i = 0; i < markers.size(); ++i) out[i] = segment_poses[model.MarkerSegment(i)] * markers[i].offset;
}

std::vector<Vec3> VirtualMarkerPositions(const KinematicModel& model, const PoseVector& pose) {
  const SegmentPoses poses = ForwardKinematics(model, pose);
  std::vector<Vec3> out;
  VirtualMarkerPositionsInto(model, poses.all(), out);
  return out;
}

}  // namespace supportseg
