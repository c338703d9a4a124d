#include "supportseg/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <unordered_map>

#include <json.hpp>

namespace supportseg::synth {
namespace {

constexpr double kPi = std::numbers::pi;

class ModelBuilder {
 public:
  void AddSegment(const std::string& name, TriangleMesh mesh = {}, bool support = false) {
    segments_.push_back({name, "", std::move(mesh), support});
  }

  void Revolute(const std::string& name, const std::string& parent, const std::string& child, const Vec3& axis,
                const Vec3& offset, double lo, double hi) {
    joints_.push_back({name, parent, child, JointType::kRevolute, axis, offset, lo, hi});
  }

  void Fixed(const std::string& name, const std::string& parent, const std::string& child, const Vec3& offset) {
    joints_.push_back({name, parent, child, JointType::kFixed, Vec3::UnitZ(), offset, 0.0, 0.0});
  }

  // Consecutive single-axis joints through massless link segments ending at `child`.
  void Group(const std::string& name, const std::string& parent, const std::string& child, const Vec3& offset,
             const std::string& axes, const std::vector<std::pair<double, double>>& limits) {
    std::string from = parent;
    for (std::size_t i = 0; i < axes.size(); ++i) {
      const char a = axes[i];
      const Vec3 axis = a == 'x' ? Vec3::UnitX() : a == 'y' ? Vec3::UnitY() : Vec3::UnitZ();
      const std::string to = i + 1 == axes.size() ? child : child + "_" + a + "link";
      if (i + 1 != axes.size()) AddSegment(to);
      const std::string suffix(1, static_cast<char>(std::toupper(a)));
      Revolute(name + suffix, from, to, axis, i == 0 ? offset : Vec3::Zero(), limits[i].first, limits[i].second);
      from = to;
    }
  }

  void Marker(const std::string& name, const std::string& segment, const Vec3& offset) {
    markers_.push_back({name, segment, offset});
  }

  KinematicModel Build(const std::string& name) {
    for (Segment& s : segments_)
      for (const Joint& j : joints_)
        if (j.child == s.name) s.parent_joint = j.name;
    return KinematicModel(name, segments_, joints_, markers_);
  }

 private:
  std::vector<Segment> segments_;
  std::vector<Joint> joints_;
  std::vector<MarkerAttachment> markers_;
};

// Humanoid dimensions, mm.
constexpr double kHipDrop = 70.0;
constexpr double kHipWidth = 90.0;
constexpr double kThigh = 430.0;
constexpr double kShank = 420.0;
constexpr double kAnkleHeight = 80.0;

std::unordered_map<std::string, std::size_t> JointIndex(const KinematicModel& model) {
  std::unordered_map<std::string, std::size_t> out;
  for (std::size_t k = 0; k < model.joint_count(); ++k) out[model.revolute_joint(k).name] = k;
  return out;
}

}  // namespace

KinematicModel SixDofFixture() {
  ModelBuilder b;
  b.AddSegment("Base");
  b.AddSegment("Link1");
  b.AddSegment("Link2");
  b.AddSegment("Link3");
  b.AddSegment("LeftHand", TriangleMesh::Box({-30, -30, 0}, {30, 30, 80}), true);
  b.AddSegment("Link5");
  b.AddSegment("LeftFoot", TriangleMesh::Box({-40, -40, -80}, {120, 40, -40}), true);

  b.Revolute("J1", "Base", "Link1", Vec3::UnitZ(), {0, 0, 120}, -2.5, 2.5);
  b.Revolute("J2", "Link1", "Link2", Vec3::UnitY(), {0, 0, 60}, -1.5, 1.5);
  b.Revolute("J3", "Link2", "Link3", Vec3::UnitY(), {0, 0, 250}, -2.0, 2.0);
  b.Revolute("J4", "Link3", "LeftHand", Vec3::UnitX(), {0, 0, 230}, -1.2, 1.2);
  b.Revolute("J5", "Base", "Link5", Vec3::UnitX(), {0, -100, -50}, -1.5, 1.5);
  b.Revolute("J6", "Link5", "LeftFoot", Vec3::UnitY(), {0, 0, -300}, -1.5, 1.5);

  b.Marker("B1", "Base", {100, 0, 0});
  b.Marker("B2", "Base", {0, 100, 0});
  b.Marker("B3", "Base", {-80, -60, 30});
  b.Marker("L1", "Link1", {80, 20, 40});
  b.Marker("L2a", "Link2", {30, 0, 150});
  b.Marker("L2b", "Link2", {-20, 40, 200});
  b.Marker("L3a", "Link3", {0, 30, 120});
  b.Marker("L3b", "Link3", {40, -20, 200});
  b.Marker("H1", "LeftHand", {30, 30, 60});
  b.Marker("H2", "LeftHand", {-30, 20, 80});
  b.Marker("L5a", "Link5", {40, -50, -150});
  b.Marker("L5b", "Link5", {0, -20, -250});
  b.Marker("F1", "LeftFoot", {100, 0, -40});
  return b.Build("six_dof_fixture");
}

KinematicModel Humanoid40() {
  ModelBuilder b;
  b.AddSegment("Pelvis");
  b.AddSegment("Belly");
  b.AddSegment("Chest");
  b.AddSegment("NeckSeg");
  b.AddSegment("Head");
  b.Group("BT", "Pelvis", "Belly", {0, 0, 100}, "xyz", {{-0.6, 0.6}, {-0.6, 0.8}, {-0.6, 0.6}});
  b.Group("BUT", "Belly", "Chest", {0, 0, 200}, "xyz", {{-0.6, 0.6}, {-0.6, 0.8}, {-0.6, 0.6}});
  b.Group("Neck", "Chest", "NeckSeg", {0, 0, 330}, "xyz", {{-0.8, 0.8}, {-0.8, 0.8}, {-1.2, 1.2}});
  b.Revolute("Skull", "NeckSeg", "Head", Vec3::UnitY(), {0, 0, 80}, -0.6, 0.6);

  b.Marker("LASI", "Pelvis", {120, 100, 40});
  b.Marker("RASI", "Pelvis", {120, -100, 40});
  b.Marker("LPSI", "Pelvis", {-110, 80, 60});
  b.Marker("RPSI", "Pelvis", {-110, -80, 60});
  b.Marker("STRN", "Belly", {110, 0, 80});
  b.Marker("T10", "Belly", {-100, 0, 120});
  b.Marker("CLAV", "Chest", {120, 0, 150});
  b.Marker("T4", "Chest", {-110, 0, 200});
  b.Marker("LBCH", "Chest", {60, 130, 250});
  b.Marker("RBCH", "Chest", {60, -130, 250});
  b.Marker("C7", "Chest", {-90, 70, 300});
  b.Marker("NECK", "NeckSeg", {-60, 0, 40});
  b.Marker("LFHD", "Head", {100, 60, 120});
  b.Marker("RFHD", "Head", {100, -60, 120});
  b.Marker("LBHD", "Head", {-80, 70, 130});
  b.Marker("RBHD", "Head", {-80, -70, 180});

  for (int side = 0; side < 2; ++side) {
    const bool left = side == 0;
    const std::string S = left ? "Left" : "Right";
    const std::string s = left ? "L" : "R";
    const double m = left ? 1.0 : -1.0;  // mirror of y
    auto mirror = [&](double lo, double hi) { return left ? std::pair{lo, hi} : std::pair{-hi, -lo}; };

    // Leg.
    b.AddSegment(S + "Thigh");
    b.AddSegment(S + "Shank");
    b.AddSegment(S + "Knee", TriangleMesh::Box({-30, -40, -40}, {30, 40, 40}), true);
    b.AddSegment(S + "Foot", TriangleMesh::Box({-60, -45, -kAnkleHeight}, {180, 45, -30}), true);
    b.AddSegment(S + "Toes");
    b.Group(S + "Hip", "Pelvis", S + "Thigh", {0, m * kHipWidth, -kHipDrop}, "xyz",
            {mirror(-0.8, 0.8), {-2.0, 1.0}, mirror(-0.8, 0.8)});
    b.Revolute(S + "KneeFlex", S + "Thigh", S + "Shank", Vec3::UnitY(), {0, 0, -kThigh}, 0.0, 2.4);
    b.Fixed(S + "KneeCap", S + "Shank", S + "Knee", {60, 0, 0});
    b.Group(S + "Ankle", S + "Shank", S + "Foot", {0, 0, -kShank}, "yx", {{-0.9, 0.9}, mirror(-0.5, 0.5)});
    b.Revolute(S + "Toe", S + "Foot", S + "Toes", Vec3::UnitY(), {180, 0, -70}, -0.8, 0.8);

    b.Marker(s + "THI", S + "Thigh", {80, 0, -350});
    b.Marker(s + "THL", S + "Thigh", {0, m * 75, -150});
    b.Marker(s + "THB", S + "Thigh", {-70, m * 40, -300});
    b.Marker(s + "TIB", S + "Shank", {70, 0, -100});
    b.Marker(s + "TIL", S + "Shank", {0, m * 60, -200});
    b.Marker(s + "TIB2", S + "Shank", {-60, m * 30, -330});
    b.Marker(s + "HEE", S + "Foot", {-60, 0, -50});
    b.Marker(s + "MT5", S + "Foot", {150, m * 40, -40});
    b.Marker(s + "MT1", S + "Foot", {100, -m * 40, -40});
    b.Marker(s + "TOE", S + "Toes", {60, 0, -5});

    // Arm.
    b.AddSegment(S + "Clavicle");
    b.AddSegment(S + "UpperArm");
    b.AddSegment(S + "Forearm");
    b.AddSegment(S + "Elbow", TriangleMesh::Box({-30, -35, -35}, {30, 35, 35}), true);
    b.AddSegment(S + "Hand", TriangleMesh::Box({-45, -15, -160}, {45, 15, 0}), true);
    b.Group(S + "SC", "Chest", S + "Clavicle", {0, m * 80, 280}, "xz", {mirror(-0.3, 0.3), mirror(-0.3, 0.3)});
    b.Group(S + "Shoulder", S + "Clavicle", S + "UpperArm", {0, m * 100, 0}, "xyz",
            {mirror(-1.0, 3.0), {-3.0, 1.0}, mirror(-1.5, 1.5)});
    b.Revolute(S + "ElbowFlex", S + "UpperArm", S + "Forearm", Vec3::UnitY(), {0, 0, -300}, -2.6, 0.0);
    b.Fixed(S + "ElbowTip", S + "Forearm", S + "Elbow", {-40, 0, 0});
    b.Group(S + "Wrist", S + "Forearm", S + "Hand", {0, 0, -260}, "xy", {mirror(-1.0, 1.0), {-1.0, 1.0}});

    b.Marker(s + "CLA", S + "Clavicle", {30, m * 60, 20});
    b.Marker(s + "UPA", S + "UpperArm", {60, m * 40, -120});
    b.Marker(s + "UPL", S + "UpperArm", {-50, m * 50, -220});
    b.Marker(s + "UPM", S + "UpperArm", {10, -m * 40, -180});
    b.Marker(s + "FRA", S + "Forearm", {40, m * 40, -80});
    b.Marker(s + "FRL", S + "Forearm", {-40, m * 50, -200});
    b.Marker(s + "FRM", S + "Forearm", {20, -m * 40, -240});
    b.Marker(s + "HND", S + "Hand", {40, m * 15, -40});
    b.Marker(s + "HNB", S + "Hand", {-40, m * 15, -60});
    b.Marker(s + "HNT", S + "Hand", {0, -m * 15, -130});
  }
  return b.Build("humanoid40");
}

MarkerSequence SynthesizeMarkers(const KinematicModel& model, const std::vector<PoseVector>& poses, long first_frame) {
  MarkerSequence seq;
  for (const MarkerAttachment& m : model.markers()) seq.marker_names.push_back(m.name);
  for (std::size_t t = 0; t < poses.size(); ++t) {
    MarkerFrame f;
    f.frame = first_frame + static_cast<long>(t);
    for (const Vec3& p : VirtualMarkerPositions(model, poses[t])) f.positions.emplace_back(p);
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

std::vector<std::string> ScriptedMotion::Labels() const {
  std::vector<std::string> out;
  for (const TruthPhase& p : phases) out.push_back(p.pose.Label());
  return out;
}

ScriptedMotion WalkOfLength(const KinematicModel& humanoid, GaitOptions options, std::size_t frames) {
  ScriptedMotion motion;
  for (options.single_supports = 1; motion.poses.size() < frames; ++options.single_supports)
    motion = GenerateWalk(humanoid, options);
  motion.poses.resize(frames);
  std::erase_if(motion.phases, [&](const TruthPhase& p) { return p.start >= static_cast<long>(frames); });
  if (!motion.phases.empty())
    motion.phases.back().duration = static_cast<long>(frames) - motion.phases.back().start;
  for (ContactInterval& c : motion.contacts) c.off = std::min(c.off, static_cast<long>(frames));
  std::erase_if(motion.contacts, [](const ContactInterval& c) { return c.on >= c.off; });
  return motion;
}

TriangleMesh WallMesh(double wall_y_mm) {
  return TriangleMesh::Box({-5000, wall_y_mm, 0}, {20000, wall_y_mm + 20, 2500});
}

namespace {

// Sole height profile of a swinging foot, k frames into a swing of `length` frames.
double SwingHeight(int k, int length, double peak) {
  static constexpr double kApproach[] = {17.6, 17.2, 16.8, 16.5, 16.0, 15.6, 15.2};
  const int core = length - 8;
  if (k <= core) return 18.0 + (peak - 18.0) * std::sin(kPi * k / core);
  return kApproach[k - core - 1];
}

// Horizontal progress of a swing in [0, 1]; the foot is still for the last 8 frames.
double SwingProgress(int k, int length) {
  const int core = length - 8;
  if (k >= core) return 1.0;
  return 0.5 - 0.5 * std::cos(kPi * k / core);
}

// Height after touchdown (d = frames since the truth onset) and before lift-off
// (d = frames until the truth lift-off, negative).
double SettleHeight(long since_touchdown) { return std::max(0.0, 14.0 - 1.5 * static_cast<double>(since_touchdown)); }

struct SupportTrack {
  std::vector<std::pair<long, long>> stance;  // half-open
  std::vector<double> placement_x;
};

void SolveLeg(double dx, double dz, double& hip, double& knee, double& ankle) {
  const double r = std::hypot(dx, dz);
  if (r > kThigh + kShank - 1.0) throw ValidationError("gait target is out of leg reach");
  const double c = (r * r - kThigh * kThigh - kShank * kShank) / (2.0 * kThigh * kShank);
  knee = std::acos(std::clamp(c, -1.0, 1.0));
  const double phi = std::atan2(-dx, -dz);
  hip = phi - std::atan2(kShank * std::sin(knee), kThigh + kShank * std::cos(knee));
  ankle = -(hip + knee);
}

// Hand clearance profile around one contact interval [on, off); `far` elsewhere.
double HandClearance(long t, long on, long off, double far) {
  static constexpr double kApproach[] = {17.6, 17.2, 16.8, 16.5, 16.0, 15.6, 15.2};
  if (t >= on && t < off) {
    if (t >= off - 2) return t == off - 2 ? 8.0 : 12.0;
    return std::max(5.0, 14.0 - 1.5 * static_cast<double>(t - on));
  }
  if (t < on) {
    const long before = on - t;  // 1..
    if (before <= 7) return kApproach[7 - before];
    if (before <= 37) {
      const double u = static_cast<double>(before - 7) / 30.0;
      return 17.6 + (far - 17.6) * (0.5 - 0.5 * std::cos(kPi * u));
    }
    return far;
  }
  const long after = t - off;  // 0..
  if (after == 0) return 20.0;
  if (after <= 20) return 20.0 + (far - 20.0) * (0.5 - 0.5 * std::cos(kPi * static_cast<double>(after) / 20.0));
  return far;
}

}  // namespace

ScriptedMotion GenerateWalk(const KinematicModel& model, const GaitOptions& opt) {
  if (opt.single_supports < 1) throw ValidationError("gait needs at least one single support");
  std::mt19937_64 rng(opt.seed);
  auto draw = [&](std::pair<int, int> range) { return std::uniform_int_distribution<int>(range.first, range.second)(rng); };

  // Phase boundaries: DS0, SS0, DS1, SS1, ..., DS_n.
  std::vector<long> ss_start, ss_end;
  long t = opt.lead_in_frames;
  for (int k = 0; k < opt.single_supports; ++k) {
    const int ss = draw(opt.single_support_frames);
    ss_start.push_back(t);
    t += ss;
    ss_end.push_back(t);
    t += k + 1 == opt.single_supports ? opt.lead_in_frames : draw(opt.double_support_frames);
  }
  const long total = t;

  // Single support k stands on the left foot when k is even; the other foot swings.
  SupportTrack feet[2];  // 0 left, 1 right
  for (int f = 0; f < 2; ++f) {
    long on = 0;
    for (int k = 0; k < opt.single_supports; ++k) {
      const bool swings = (k % 2 == 0) == (f == 1);
      if (!swings) continue;
      feet[f].stance.push_back({on, ss_start[k]});
      on = ss_end[k];
    }
    feet[f].stance.push_back({on, total});
    for (const auto& [a, b] : feet[f].stance)
      feet[f].placement_x.push_back(opt.speed_mm_per_frame * 0.5 * static_cast<double>(a + b - 1));
  }

  const auto index = JointIndex(model);
  auto joint = [&](const std::string& name) { return index.at(name); };
  ScriptedMotion out;

  const std::size_t left_shoulder = joint("LeftShoulderX");
  const std::size_t hand_segment = model.SegmentIndex("LeftHand");
  const TriangleMesh wall = WallMesh(opt.wall_y_mm);
  const MeshProximity wall_prox(wall);

  for (long f = 0; f < total; ++f) {
    PoseVector pose = model.NeutralPose();
    pose.root_position = {opt.speed_mm_per_frame * static_cast<double>(f), 0.0, opt.pelvis_height_mm};
    for (int side = 0; side < 2; ++side) {
      const SupportTrack& track = feet[side];
      double x = 0.0, h = 0.0;
      for (std::size_t i = 0; i < track.stance.size(); ++i) {
        const auto [a, b] = track.stance[i];
        if (f >= a && f < b) {
          x = track.placement_x[i];
          h = a == 0 ? 0.0 : SettleHeight(f - a);
          if (b != total && f >= b - 2) h = f == b - 2 ? 4.0 : 10.0;
          break;
        }
        if (i + 1 < track.stance.size() && f >= b && f < track.stance[i + 1].first) {
          const int k = static_cast<int>(f - b);
          const int len = static_cast<int>(track.stance[i + 1].first - b);
          const double u = SwingProgress(k, len);
          x = track.placement_x[i] + u * (track.placement_x[i + 1] - track.placement_x[i]);
          h = SwingHeight(k, len, opt.step_height_mm);
          break;
        }
      }
      const double dx = x - pose.root_position.x();
      const double dz = (kAnkleHeight + h) - (opt.pelvis_height_mm - kHipDrop);
      double hip, knee, ankle;
      SolveLeg(dx, dz, hip, knee, ankle);
      const std::string S = side == 0 ? "Left" : "Right";
      pose.joint_angles[static_cast<Eigen::Index>(joint(S + "HipY"))] = hip;
      pose.joint_angles[static_cast<Eigen::Index>(joint(S + "KneeFlex"))] = knee;
      pose.joint_angles[static_cast<Eigen::Index>(joint(S + "AnkleY"))] = ankle;
    }

    // Left hand: abduct the shoulder until the hand clears the wall by the scripted amount.
    if (!opt.left_hand_contacts.empty()) {
      auto distance = [&](double angle) {
        PoseVector p = pose;
        p.joint_angles[static_cast<Eigen::Index>(left_shoulder)] = angle;
        const SegmentPoses seg = ForwardKinematics(model, p);
        return wall_prox.Distance(Transform::Identity(), model.segments()[hand_segment].mesh, seg[hand_segment])
            .distance;
      };
      const double hanging = distance(0.0);
      double clearance = hanging;
      for (const auto& [on, off] : opt.left_hand_contacts) clearance = std::min(clearance, HandClearance(f, on, off, hanging));
      if (clearance < hanging) {
        // The distance falls until the hand meets the wall; bracket the first crossing.
        double lo = 0.0, hi = 0.0;
        while (distance(hi) > clearance) {
          lo = hi;
          hi += 0.01;
          if (hi > 1.2) throw ValidationError("hand cannot reach the wall");
        }
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          (distance(mid) > clearance ? lo : hi) = mid;
        }
        pose.joint_angles[static_cast<Eigen::Index>(left_shoulder)] = 0.5 * (lo + hi);
      }
    }
    if (!model.WithinLimits(pose)) throw ValidationError("scripted gait leaves the joint limits at frame " + std::to_string(f));
    out.poses.push_back(std::move(pose));
  }

  for (int side = 0; side < 2; ++side)
    for (const auto& [a, b] : feet[side].stance) out.contacts.push_back({side == 0 ? "LeftFoot" : "RightFoot", a, b});
  for (const auto& [on, off] : opt.left_hand_contacts) out.contacts.push_back({"LeftHand", on, off});

  for (long f = 0; f < total; ++f) {
    std::set<std::string> active;
    for (const ContactInterval& c : out.contacts)
      if (f >= c.on && f < c.off) active.insert(c.segment);
    const SupportPose p = SupportPoseAt(active);
    if (out.phases.empty() || out.phases.back().pose != p) out.phases.push_back({p, f, 0});
    ++out.phases.back().duration;
  }
  return out;
}

std::filesystem::path WriteBundle(const std::filesystem::path& dir, const BundleSpec& spec,
                                  const KinematicModel& model, const ScriptedMotion& motion, double wall_y_mm) {
  using Json = nlohmann::ordered_json;
  const MarkerSequence subject = SynthesizeMarkers(model, motion.poses);
  WriteTextFile(dir / "subject.csv", EmitMarkerCsv(subject));

  Json objects = Json::array();
  objects.push_back({{"name", "floor"}, {"mesh", {{"quad", {{"side", 40000}, {"z", 0}}}}}});
  if (spec.wall) {
    const TriangleMesh mesh = WallMesh(wall_y_mm);
    const Vec3 lo = mesh.vertices().front(), hi = mesh.vertices().back();
    objects.push_back({{"name", "wall"},
                       {"mesh", {{"box", {{"min", {lo.x(), lo.y(), lo.z()}}, {"max", {hi.x(), hi.y(), hi.z()}}}}}}});
  }
  if (spec.moving_box) {
    // A carried-looking box far from the subject that slides 2 mm per frame.
    const std::vector<std::string> names = {"BOX1", "BOX2", "BOX3", "BOX4"};
    const std::vector<Vec3> offsets = {{-150, -100, 200}, {150, -100, 200}, {150, 100, 200}, {-140, 90, 0}};
    MarkerSequence box;
    box.marker_names = names;
    for (std::size_t t = 0; t < subject.frames.size(); ++t) {
      RigidPose pose;
      pose.translation = {2.0 * static_cast<double>(t), -1500.0, 0.0};
      pose.rotation = {0.0, 0.0, 0.002 * static_cast<double>(t)};
      const Transform tr = pose.ToTransform();
      MarkerFrame f;
      f.frame = subject.frames[t].frame;
      for (const Vec3& o : offsets) f.positions.emplace_back(tr * o);
      box.frames.push_back(std::move(f));
    }
    WriteTextFile(dir / "box.csv", EmitMarkerCsv(box));
    Json offs = Json::object();
    for (std::size_t i = 0; i < names.size(); ++i) offs[names[i]] = {offsets[i].x(), offsets[i].y(), offsets[i].z()};
    objects.push_back({{"name", "box"},
                       {"mesh", {{"box", {{"min", {-150, -100, 0}}, {"max", {150, 100, 200}}}}}},
                       {"markers", "box.csv"},
                       {"marker_offsets", offs}});
  }

  Json manifest{{"id", spec.id},
                {"category", spec.category},
                {"description", spec.description},
                {"fps", 100},
                {"subject_markers", "subject.csv"},
                {"objects", objects}};
  if (spec.annotate) manifest["annotation"] = motion.Labels();
  const std::filesystem::path path = dir / "manifest.json";
  WriteTextFile(path, manifest.dump(2) + "\n");
  return path;
}

std::map<TransitionKey, std::pair<std::size_t, long>> ReferenceTransitionCells() {
  // (appearance %, time %) per cell; counts and frames follow from totals of
  // 1323 transitions and 54148 frames.
  struct Cell {
    const char* from;
    const char* to;
    double appearance;
    double time;
  };
  static constexpr Cell kCells[] = {
      {"1Foot", "1Foot", 4.38, 5.69},
      {"1Foot", "1Foot-1Hand", 9.30, 7.90},
      {"1Foot", "2Feet", 22.90, 25.56},
      {"1Foot", "2Feet-1Hand", 0.15, 0.26},
      {"1Foot", "1Foot-2Hands", 0.08, 0.04},
      {"1Foot-1Hand", "1Foot", 9.15, 13.64},
      {"1Foot-1Hand", "1Foot-1Hand", 1.81, 2.26},
      {"1Foot-1Hand", "2Feet", 0.08, 0.03},
      {"1Foot-1Hand", "2Feet-1Hand", 12.24, 16.59},
      {"1Foot-1Hand", "2Feet-2Hands", 0.08, 0.02},
      {"1Foot-1Hand", "1Foot-2Hands", 0.15, 0.02},
      {"2Feet", "1Foot", 16.02, 10.05},
      {"2Feet", "1Foot-1Hand", 0.15, 0.04},
      {"2Feet", "2Feet-1Hand", 3.48, 2.23},
      {"2Feet", "2Feet-2Hands", 0.08, 0.06},
      {"2Feet-1Hand", "1Foot", 0.23, 0.07},
      {"2Feet-1Hand", "1Foot-1Hand", 11.72, 4.38},
      {"2Feet-1Hand", "2Feet", 4.61, 5.31},
      {"2Feet-1Hand", "2Feet-2Hands", 0.98, 0.15},
      {"2Feet-2Hands", "2Feet-1Hand", 0.83, 1.22},
      {"2Feet-2Hands", "1Foot-2Hands", 0.68, 0.75},
      {"1Foot-2Hands", "1Foot-1Hand", 0.53, 1.27},
      {"1Foot-2Hands", "2Feet-2Hands", 0.38, 2.45},
  };
  constexpr double kFrames = 54148.0;
  std::map<TransitionKey, std::pair<std::size_t, long>> out;
  for (const Cell& c : kCells) {
    const auto count = static_cast<std::size_t>(std::lround(c.appearance * kReferenceTransitions / 100.0));
    const long frames = std::max<long>(static_cast<long>(count), std::lround(c.time * kFrames / 100.0));
    out[{c.from, c.to}] = {count, frames};
  }
  return out;
}

std::vector<TransitionSequence> BuildCorpus(const std::map<TransitionKey, std::pair<std::size_t, long>>& cells,
                                            const std::string& category, std::uint64_t seed) {
  struct Edge {
    std::string to;
    long duration;
  };
  std::map<std::string, std::vector<Edge>> out_edges;
  std::map<std::string, long> balance;  // out minus in
  std::mt19937_64 rng(seed);
  for (const auto& [key, cell] : cells) {
    const auto [count, frames] = cell;
    if (count == 0) continue;
    const long base = frames / static_cast<long>(count);
    const long extra = frames % static_cast<long>(count);
    for (std::size_t i = 0; i < count; ++i)
      out_edges[key.first].push_back({key.second, base + (static_cast<long>(i) < extra ? 1 : 0)});
    balance[key.first] += static_cast<long>(count);
    balance[key.second] -= static_cast<long>(count);
  }
  for (auto& [node, edges] : out_edges) std::shuffle(edges.begin(), edges.end(), rng);

  // Greedy trail decomposition, starting from surplus-out nodes first.
  std::vector<std::vector<std::pair<std::string, long>>> trails;  // (pose, duration in it)
  std::vector<std::string> starts;
  while (true) {
    std::string start;
    for (const auto& [node, b] : balance)
      if (b > 0 && !out_edges[node].empty()) {
        start = node;
        break;
      }
    if (start.empty())
      for (const auto& [node, edges] : out_edges)
        if (!edges.empty()) {
          start = node;
          break;
        }
    if (start.empty()) break;
    std::vector<std::pair<std::string, long>> trail;
    std::string at = start;
    while (!out_edges[at].empty()) {
      const Edge e = out_edges[at].back();
      out_edges[at].pop_back();
      --balance[at];
      ++balance[e.to];
      trail.push_back({at, e.duration});
      at = e.to;
    }
    trail.push_back({at, -1});
    trails.push_back(std::move(trail));
  }

  std::vector<TransitionSequence> corpus;
  std::uniform_int_distribution<int> chunk_len(5, 15);
  int id = 0;
  for (const auto& trail : trails) {
    std::size_t i = 0;
    while (i + 1 < trail.size()) {
      const std::size_t j = std::min(trail.size() - 1, i + static_cast<std::size_t>(chunk_len(rng)));
      TransitionSequence seq;
      char name[32];
      std::snprintf(name, sizeof name, "corpus_%04d", id++);
      seq.motion_id = name;
      seq.category = category;
      long frame = 0;
      auto push = [&](const std::string& from, std::optional<std::string> to, long duration, bool boundary) {
        TransitionRecord r;
        r.from = SupportPose::FromLabel(from);
        if (to) r.to = SupportPose::FromLabel(*to);
        r.duration_frames = duration;
        r.start_frame = frame;
        r.motion_id = seq.motion_id;
        r.boundary = boundary;
        frame += duration;
        seq.records.push_back(std::move(r));
      };
      const std::string& first = trail[i].first;
      push(first == "2Feet" ? "1Foot" : "2Feet", first, 40, true);
      for (std::size_t k = i; k < j; ++k) push(trail[k].first, trail[k + 1].first, trail[k].second, false);
      push(trail[j].first, std::nullopt, 40, true);
      corpus.push_back(std::move(seq));
      i = j;
    }
  }
  return corpus;
}

}  // namespace supportseg::synth
