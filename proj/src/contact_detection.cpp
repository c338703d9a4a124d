#include "supportseg/contact_detection.hpp"

#include <algorithm>

namespace supportseg {

double DetectionThresholds::DistanceFor(SegmentClass c) const {
  switch (c) {
    case SegmentClass::kFoot: return dist_feet_mm;
    case SegmentClass::kHand: return dist_hands_mm;
    case SegmentClass::kKnee: return dist_knees_mm;
    case SegmentClass::kElbow: return dist_elbows_mm;
  }
  return 0.0;
}

void DetectionThresholds::Validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ValidationError(std::string("threshold '") + name + "' must be positive");
  };
  positive(dist_feet_mm, "dist_feet");
  positive(dist_hands_mm, "dist_hands");
  positive(dist_knees_mm, "dist_knees");
  positive(dist_elbows_mm, "dist_elbows");
  positive(vel_mm_per_s, "vel");
  positive(hold_frames, "hold_frames");
  positive(smoothing_window_frames, "smoothing_window");
  positive(env_motion_max_mm, "env_motion_max");
  if (smoothing_window_frames % 2 == 0) throw ValidationError("smoothing window must be odd");
}

bool ClassifyEnvironmental(const std::vector<Transform>& poses, const DetectionThresholds& thresholds) {
  if (poses.empty()) return true;
  const Vec3 start = poses.front().translation();
  double worst = 0.0;
  for (const Transform& t : poses) worst = std::max(worst, (t.translation() - start).norm());
  return worst <= thresholds.env_motion_max_mm;
}

bool ClassifyEnvironmental(const ObjectTrack& track, const DetectionThresholds& thresholds) {
  std::vector<Transform> poses;
  poses.reserve(track.poses.size());
  for (const RigidPose& p : track.poses) poses.push_back(p.ToTransform());
  return ClassifyEnvironmental(poses, thresholds);
}

std::vector<double> SegmentSpeed(const std::vector<Vec3>& positions, int window, double fps) {
  const std::size_t n = positions.size();
  if (n < 2) throw ValidationError("segment speed needs at least 2 frames");
  if (window < 1 || window % 2 == 0) throw ValidationError("smoothing window must be a positive odd number");

  std::vector<Vec3> velocity(n);
  velocity[0] = (positions[1] - positions[0]) * fps;
  velocity[n - 1] = (positions[n - 1] - positions[n - 2]) * fps;
  for (std::size_t t = 1; t + 1 < n; ++t) velocity[t] = (positions[t + 1] - positions[t - 1]) * (fps / 2.0);

  const std::ptrdiff_t half = window / 2;
  std::vector<double> speed(n);
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(n); ++t) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, t - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, t + half);
    Vec3 sum = Vec3::Zero();
    for (std::ptrdiff_t k = lo; k <= hi; ++k) sum += velocity[k];
    speed[t] = (sum / static_cast<double>(hi - lo + 1)).norm();
  }
  return speed;
}

std::vector<bool> ApplyContactRule(const std::vector<double>& distance, const std::vector<double>& speed,
                                   double distance_threshold, const DetectionThresholds& thresholds) {
  const std::size_t n = distance.size();
  if (speed.size() != n) throw ValidationError("distance and speed series differ in length");
  // fast_from[t]: first frame >= t whose speed is not below the threshold.
  std::vector<std::size_t> fast_from(n + 1, n);
  for (std::size_t t = n; t-- > 0;) fast_from[t] = speed[t] < thresholds.vel_mm_per_s ? fast_from[t + 1] : t;

  const std::size_t hold = static_cast<std::size_t>(thresholds.hold_frames);
  std::vector<bool> contact(n, false);
  std::size_t t = 0;
  while (t < n) {
    if (!(distance[t] < distance_threshold)) {
      ++t;
      continue;
    }
    std::size_t end = t;
    while (end < n && distance[end] < distance_threshold) ++end;
    for (std::size_t onset = t; onset < end; ++onset) {
      if (fast_from[onset] >= std::min(onset + hold, n)) {
        std::fill(contact.begin() + static_cast<std::ptrdiff_t>(onset), contact.begin() + static_cast<std::ptrdiff_t>(end),
                  true);
        break;
      }
    }
    t = end;
  }
  return contact;
}

namespace {

std::vector<std::vector<Transform>> SegmentTransformsPerFrame(const KinematicModel& model, const PoseTrajectory& poses) {
  std::vector<std::vector<Transform>> out(poses.size());
  for (std::size_t t = 0; t < poses.size(); ++t) {
    const Eigen::VectorXd flat = poses.fits[t].pose.Flat();
    model.ForwardKinematicsInto(std::span<const double>(flat.data(), static_cast<std::size_t>(flat.size())), out[t]);
  }
  return out;
}

void CheckFrameCounts(const PoseTrajectory& poses, const std::vector<EnvironmentElement>& elements) {
  for (const EnvironmentElement& e : elements)
    if (e.poses.size() != poses.size())
      throw ValidationError("element '" + e.name + "' has " + std::to_string(e.poses.size()) +
                            " frames, pose trajectory has " + std::to_string(poses.size()));
}

std::vector<double> DistanceSeries(const KinematicModel& model, const std::vector<std::vector<Transform>>& world,
                                   std::size_t segment, const MeshProximity& element,
                                   const std::vector<Transform>& element_poses) {
  const TriangleMesh& mesh = model.segments()[segment].mesh;
  std::vector<double> d(world.size());
  for (std::size_t t = 0; t < world.size(); ++t) d[t] = element.Distance(element_poses[t], mesh, world[t][segment]).distance;
  return d;
}

}  // namespace

std::vector<std::vector<double>> SegmentElementDistances(const KinematicModel& model, const PoseTrajectory& poses,
                                                         const std::vector<EnvironmentElement>& elements,
                                                         const std::vector<std::size_t>& segments) {
  CheckFrameCounts(poses, elements);
  const auto world = SegmentTransformsPerFrame(model, poses);
  std::vector<std::vector<double>> out;
  for (const EnvironmentElement& e : elements) {
    const MeshProximity prox(e.mesh);
    for (std::size_t s : segments) out.push_back(DistanceSeries(model, world, s, prox, e.poses));
  }
  return out;
}

ContactTimeline DetectContacts(const KinematicModel& model, const PoseTrajectory& poses,
                               const std::vector<EnvironmentElement>& elements,
                               const DetectionThresholds& thresholds, double fps) {
  thresholds.Validate();
  if (!(fps > 0.0)) throw ValidationError("frame rate must be positive");
  CheckFrameCounts(poses, elements);

  ContactTimeline timeline;
  timeline.frames = poses.frames;
  timeline.fps = fps;
  timeline.contacts.assign(poses.size(), {});
  if (poses.size() == 0) return timeline;

  const auto world = SegmentTransformsPerFrame(model, poses);
  const std::vector<std::size_t> support = model.SupportSegments();

  struct Candidate {
    std::size_t segment;
    double threshold;
    std::vector<double> speed;
  };
  std::vector<Candidate> candidates;
  for (std::size_t s : support) {
    const std::string& name = model.segments()[s].name;
    const auto cls = SupportSegmentClass(name);
    if (!cls) throw ValidationError("segment '" + name + "' has no support class");
    const Vec3 centroid = model.segments()[s].mesh.Centroid();
    std::vector<Vec3> path(poses.size());
    for (std::size_t t = 0; t < poses.size(); ++t) path[t] = world[t][s] * centroid;
    std::vector<double> speed = poses.size() >= 2 ? SegmentSpeed(path, thresholds.smoothing_window_frames, fps)
                                                   : std::vector<double>(poses.size(), 0.0);
    candidates.push_back({s, thresholds.DistanceFor(*cls), std::move(speed)});
  }

  for (const EnvironmentElement& element : elements) {
    if (!ClassifyEnvironmental(element.poses, thresholds)) continue;
    const MeshProximity prox(element.mesh);
    for (const Candidate& c : candidates) {
      const std::vector<double> distance = DistanceSeries(model, world, c.segment, prox, element.poses);
      const std::vector<bool> contact = ApplyContactRule(distance, c.speed, c.threshold, thresholds);
      for (std::size_t t = 0; t < contact.size(); ++t)
        if (contact[t]) timeline.contacts[t].push_back({model.segments()[c.segment].name, element.name});
    }
  }
  for (auto& frame : timeline.contacts) std::sort(frame.begin(), frame.end());
  return timeline;
}

}  // namespace supportseg
