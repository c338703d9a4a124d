#pragma once

#include <optional>
#include <string>
#include <vector>

#include "supportseg/common.hpp"
#include "supportseg/kinematic_model.hpp"
#include "supportseg/optimizer.hpp"

namespace supportseg {

// Observed marker positions for one frame; nullopt marks an occluded marker.
struct MarkerFrame {
  long frame = 0;
  std::vector<std::optional<Vec3>> positions;

  std::size_t observed_count() const;
};

struct MarkerSequence {
  std::vector<std::string> marker_names;
  std::vector<MarkerFrame> frames;

  std::size_t frame_count() const { return frames.size(); }
};

struct FitOptions {
  SubplexOptions optimizer{};
  double translation_step_mm = 10.0;
  double angle_step_rad = 0.05;
  // Run a least-squares stage before Subplex, sharing the evaluation budget.
  // Subplex then starts from its result with steps scaled by polish_scale.
  bool least_squares_start = true;
  double polish_scale = 0.02;
};

struct FitResult {
  PoseVector pose;
  double objective = 0.0;  // mm^2
  int iterations = 0;      // objective evaluations
  bool converged = false;
};

struct PoseTrajectory {
  std::vector<long> frames;
  std::vector<FitResult> fits;

  std::size_t size() const { return fits.size(); }
};

// f(x) = sum over observed markers of |u_i - v_i(x)|^2.
// Throws ValidationError if every marker is missing or the marker count differs.
double MarkerObjective(const KinematicModel& model, const PoseVector& pose, const MarkerFrame& frame);

// Box-constrained minimisation of MarkerObjective from `initial`. Joints that
// no observed marker depends on keep their initial value.
FitResult FitFrame(const KinematicModel& model, const MarkerFrame& frame, const PoseVector& initial,
                   const FitOptions& options = {});

// Neutral joint angles with the root rigidly registered onto the observed markers.
PoseVector InitialPoseForFrame(const KinematicModel& model, const MarkerFrame& frame);

// Frame t > 0 starts from frame t-1's solution. Errors name the failing frame.
PoseTrajectory FitSequence(const KinematicModel& model, const MarkerSequence& sequence, const FitOptions& options = {});

// Rigid body described by marker positions in its local frame.
struct ObjectModel {
  std::string name;
  std::vector<std::string> marker_names;
  std::vector<Vec3> marker_offsets;  // mm, local frame
};

// Six-value pose: translation followed by intrinsic x-y-z Euler angles.
struct RigidPose {
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();

  Transform ToTransform() const;
  static RigidPose FromTransform(const Transform& t);
};

struct ObjectTrack {
  std::string name;
  std::vector<long> frames;
  std::vector<RigidPose> poses;
  std::size_t marker_count = 0;
};

// Least-squares rigid transform mapping `local` onto `observed` (Kabsch).
// Throws ValidationError for fewer than 3 points or a collinear configuration.
Transform FitRigidTransform(const std::vector<Vec3>& local, const std::vector<Vec3>& observed);

ObjectTrack FitObjectTrack(const ObjectModel& object, const MarkerSequence& sequence);

}  // namespace supportseg
