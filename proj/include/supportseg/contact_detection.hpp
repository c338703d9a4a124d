#pragma once

#include <string>
#include <vector>

#include "supportseg/geometry.hpp"
#include "supportseg/kinematic_model.hpp"
#include "supportseg/marker_fit.hpp"

namespace supportseg {

struct DetectionThresholds {
  double dist_feet_mm = 15.0;
  double dist_hands_mm = 15.0;
  double dist_knees_mm = 35.0;
  double dist_elbows_mm = 30.0;
  double vel_mm_per_s = 200.0;
  int hold_frames = 5;
  int smoothing_window_frames = 5;
  double env_motion_max_mm = 50.0;

  double DistanceFor(SegmentClass c) const;
  // Throws ValidationError unless every field is positive and the window is odd.
  void Validate() const;
};

struct ContactPair {
  std::string segment;
  std::string element;

  auto operator<=>(const ContactPair&) const = default;
};

struct ContactTimeline {
  std::vector<long> frames;
  std::vector<std::vector<ContactPair>> contacts;  // sorted per frame
  double fps = kFramesPerSecond;

  std::size_t size() const { return frames.size(); }
};

// An environment mesh with one world transform per frame.
struct EnvironmentElement {
  std::string name;
  TriangleMesh mesh;
  std::vector<Transform> poses;
};

// True iff the largest translation away from the first pose stays within
// env_motion_max_mm.
bool ClassifyEnvironmental(const ObjectTrack& track, const DetectionThresholds& thresholds);
bool ClassifyEnvironmental(const std::vector<Transform>& poses, const DetectionThresholds& thresholds);

// Central-difference velocity (one-sided at the ends), centred moving average
// over `window` frames truncated at the sequence ends, then the norm.
std::vector<double> SegmentSpeed(const std::vector<Vec3>& positions, int window, double fps = kFramesPerSecond);

// Per-frame (segment, element) distances; used by DetectContacts and exposed for reports.
std::vector<std::vector<double>> SegmentElementDistances(const KinematicModel& model, const PoseTrajectory& poses,
                                                         const std::vector<EnvironmentElement>& elements,
                                                         const std::vector<std::size_t>& segments);

// A (segment, element) pair is in contact from the first frame of a proximity
// run (distance < threshold) at which the segment speed stays below the velocity
// threshold for hold_frames frames, until the run ends. Runs without such an
// onset yield no contact. Elements that move more than env_motion_max_mm are
// never supports.
ContactTimeline DetectContacts(const KinematicModel& model, const PoseTrajectory& poses,
                               const std::vector<EnvironmentElement>& elements,
                               const DetectionThresholds& thresholds, double fps = kFramesPerSecond);

// Applies the onset/hold rule to one pair given precomputed distances and speeds.
std::vector<bool> ApplyContactRule(const std::vector<double>& distance, const std::vector<double>& speed,
                                   double distance_threshold, const DetectionThresholds& thresholds);

}  // namespace supportseg
