#include "supportseg/marker_fit.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <unordered_map>

namespace supportseg {

std::size_t MarkerFrame::observed_count() const {
  std::size_t n = 0;
  for (const auto& p : positions) n += p.has_value();
  return n;
}

namespace {

void CheckFrame(const KinematicModel& model, const MarkerFrame& frame) {
  if (frame.positions.size() != model.markers().size())
    throw ValidationError("frame has " + std::to_string(frame.positions.size()) + " markers, model has " +
                          std::to_string(model.markers().size()));
  if (frame.observed_count() == 0) throw ValidationError("all markers are missing");
}

double SumSquaredError(const std::vector<Vec3>& virtual_markers, const MarkerFrame& frame) {
  double sum = 0.0;
  for (std::size_t i = 0; i < virtual_markers.size(); ++i)
    if (frame.positions[i]) sum += (*frame.positions[i] - virtual_markers[i]).squaredNorm();
  return sum;
}

}  // namespace

double MarkerObjective(const KinematicModel& model, const PoseVector& pose, const MarkerFrame& frame) {
  CheckFrame(model, frame);
  return SumSquaredError(VirtualMarkerPositions(model, pose), frame);
}

FitResult FitFrame(const KinematicModel& model, const MarkerFrame& frame, const PoseVector& initial,
                   const FitOptions& options) {
  CheckFrame(model, frame);
  for (const auto& p : frame.positions)
    if (p && !p->allFinite()) throw ValidationError("marker coordinates are not finite");
  if (initial.size() != model.dof()) throw ValidationError("initial pose length does not match the model");
  if (!model.WithinLimits(initial)) throw ValidationError("initial pose violates joint limits");

  const std::size_t n = model.dof();
  std::vector<bool> active(n, false);
  for (std::size_t i = 0; i < 6; ++i) active[i] = true;
  for (std::size_t m = 0; m < frame.positions.size(); ++m) {
    if (!frame.positions[m]) continue;
    for (std::size_t dof : model.AncestorDofs(model.MarkerSegment(m))) active[dof] = true;
  }

  std::vector<Transform> segment_poses;
  std::vector<Vec3> virtual_markers;
  const ObjectiveFunction objective = [&](std::span<const double> x) {
    model.ForwardKinematicsInto(x, segment_poses);
    VirtualMarkerPositionsInto(model, segment_poses, virtual_markers);
    return SumSquaredError(virtual_markers, frame);
  };

  const Eigen::VectorXd flat = initial.Flat();
  std::vector<double> x0(flat.data(), flat.data() + flat.size());
  std::vector<double> step(n, options.angle_step_rad);
  for (std::size_t i = 0; i < 3; ++i) step[i] = options.translation_step_mm;
  const std::vector<double> lower = model.LowerBounds();
  const std::vector<double> upper = model.UpperBounds();

  int used = 0;
  if (options.least_squares_start) {
    const ResidualFunction residuals = [&](std::span<const double> x, std::vector<double>& r) {
      model.ForwardKinematicsInto(x, segment_poses);
      VirtualMarkerPositionsInto(model, segment_poses, virtual_markers);
      r.clear();
      for (std::size_t i = 0; i < virtual_markers.size(); ++i)
        if (frame.positions[i])
          for (int c = 0; c < 3; ++c) r.push_back((*frame.positions[i])[c] - virtual_markers[i][c]);
    };
    LeastSquaresOptions ls;
    ls.max_evaluations = options.optimizer.max_evaluations / 2;
    ls.ftol_abs = options.optimizer.ftol_abs;
    const SubplexResult pre = MinimizeLeastSquares(residuals, x0, lower, upper, ls, active);
    x0 = pre.x;
    used = pre.evaluations;
    for (double& s : step) s *= options.polish_scale;
  }
  SubplexOptions polish = options.optimizer;
  polish.max_evaluations = std::max(1, options.optimizer.max_evaluations - used);
  SubplexResult r = MinimizeSubplex(objective, std::move(x0), lower, upper, std::move(step), polish, active);
  r.evaluations += used;
  FitResult out;
  out.pose = PoseVector::FromFlat(r.x, model.joint_count());
  out.objective = r.value;
  out.iterations = r.evaluations;
  out.converged = r.converged;
  return out;
}

Transform FitRigidTransform(const std::vector<Vec3>& local, const std::vector<Vec3>& observed) {
  if (local.size() != observed.size()) throw ValidationError("rigid fit needs matching point sets");
  if (local.size() < 3) throw ValidationError("rigid fit needs at least 3 markers, got " + std::to_string(local.size()));
  Vec3 lc = Vec3::Zero(), oc = Vec3::Zero();
  for (std::size_t i = 0; i < local.size(); ++i) {
    lc += local[i];
    oc += observed[i];
  }
  lc /= static_cast<double>(local.size());
  oc /= static_cast<double>(local.size());

  Mat3 spread = Mat3::Zero();
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < local.size(); ++i) {
    const Vec3 l = local[i] - lc;
    spread += l * l.transpose();
    h += l * (observed[i] - oc).transpose();
  }
  const Eigen::JacobiSVD<Mat3> shape(spread);
  const Vec3 sv = shape.singularValues();
  if (sv[0] <= 0.0 || sv[1] <= 1e-10 * sv[0]) throw ValidationError("rigid fit markers are collinear");

  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  Transform t = Transform::Identity();
  t.linear() = v * d * u.transpose();
  t.translation() = oc - t.linear() * lc;
  return t;
}

PoseVector InitialPoseForFrame(const KinematicModel& model, const MarkerFrame& frame) {
  CheckFrame(model, frame);
  PoseVector pose = model.NeutralPose();
  const std::vector<Vec3> neutral = VirtualMarkerPositions(model, pose);
  std::vector<Vec3> local, observed;
  for (std::size_t i = 0; i < neutral.size(); ++i) {
    if (!frame.positions[i]) continue;
    local.push_back(neutral[i]);
    observed.push_back(*frame.positions[i]);
  }
  Transform root = Transform::Identity();
  try {
    root = FitRigidTransform(local, observed);
  } catch (const ValidationError&) {
    Vec3 shift = Vec3::Zero();
    for (std::size_t i = 0; i < local.size(); ++i) shift += observed[i] - local[i];
    root.translation() = shift / static_cast<double>(local.size());
  }
  pose.root_position = root.translation();
  pose.root_rotation = EulerXYZFromRotation(root.linear());
  return pose;
}

PoseTrajectory FitSequence(const KinematicModel& model, const MarkerSequence& sequence, const FitOptions& options) {
  if (sequence.frames.empty()) throw ValidationError("marker sequence has no frames");
  PoseTrajectory out;
  out.frames.reserve(sequence.frames.size());
  out.fits.reserve(sequence.frames.size());
  for (std::size_t t = 0; t < sequence.frames.size(); ++t) {
    const MarkerFrame& frame = sequence.frames[t];
    try {
      const PoseVector initial = t == 0 ? InitialPoseForFrame(model, frame) : out.fits.back().pose;
      out.fits.push_back(FitFrame(model, frame, initial, options));
      out.frames.push_back(frame.frame);
    } catch (const ValidationError& e) {
      throw ValidationError("frame " + std::to_string(frame.frame) + ": " + e.what());
    }
  }
  return out;
}

Transform RigidPose::ToTransform() const {
  Transform t = Transform::Identity();
  t.translation() = translation;
  t.linear() = RotationFromEulerXYZ(rotation.x(), rotation.y(), rotation.z());
  return t;
}

RigidPose RigidPose::FromTransform(const Transform& t) {
  return {t.translation(), EulerXYZFromRotation(t.linear())};
}

ObjectTrack FitObjectTrack(const ObjectModel& object, const MarkerSequence& sequence) {
  if (object.marker_names.size() != object.marker_offsets.size())
    throw ValidationError("object '" + object.name + "' has mismatched marker names and offsets");
  if (object.marker_names.size() < 3)
    throw ValidationError("object '" + object.name + "' needs at least 3 markers");
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < sequence.marker_names.size(); ++i) column[sequence.marker_names[i]] = i;
  std::vector<std::size_t> source;
  for (const std::string& name : object.marker_names) {
    const auto it = column.find(name);
    if (it == column.end())
      throw ValidationError("object '" + object.name + "' marker '" + name + "' is absent from its sequence");
    source.push_back(it->second);
  }

  ObjectTrack track;
  track.name = object.name;
  track.marker_count = object.marker_names.size();
  for (const MarkerFrame& frame : sequence.frames) {
    std::vector<Vec3> local, observed;
    for (std::size_t k = 0; k < source.size(); ++k) {
      const auto& p = frame.positions[source[k]];
      if (!p) continue;
      local.push_back(object.marker_offsets[k]);
      observed.push_back(*p);
    }
    try {
      track.poses.push_back(RigidPose::FromTransform(FitRigidTransform(local, observed)));
    } catch (const ValidationError& e) {
      throw ValidationError("object '" + object.name + "' frame " + std::to_string(frame.frame) + ": " + e.what());
    }
    track.frames.push_back(frame.frame);
  }
  return track;
}

}  // namespace supportseg
