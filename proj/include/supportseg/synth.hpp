#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "supportseg/io.hpp"
#include "supportseg/kinematic_model.hpp"
#include "supportseg/marker_fit.hpp"
#include "supportseg/pose_segmentation.hpp"

// Synthetic models, motions and corpora for fixtures, tests and benchmarks.
namespace supportseg::synth {

// Root plus six revolute joints on two branches, 13 markers.
KinematicModel SixDofFixture();

// Forty revolute joints, 56 markers, eight support segments (feet and hands
// as boxes, knees and elbows as small boxes on fixed joints).
KinematicModel Humanoid40();

MarkerSequence SynthesizeMarkers(const KinematicModel& model, const std::vector<PoseVector>& poses,
                                 long first_frame = 0);

// Half-open truth interval of one support segment being in contact.
struct ContactInterval {
  std::string segment;
  long on = 0;
  long off = 0;
};

struct TruthPhase {
  SupportPose pose;
  long start = 0;
  long duration = 0;
};

struct ScriptedMotion {
  std::vector<PoseVector> poses;
  std::vector<ContactInterval> contacts;
  std::vector<TruthPhase> phases;  // maximal runs of the truth pose

  std::vector<std::string> Labels() const;
};

struct GaitOptions {
  std::uint64_t seed = 1;
  int single_supports = 6;
  double speed_mm_per_frame = 6.0;  // 0 steps in place
  double pelvis_height_mm = 930.0;
  double step_height_mm = 60.0;
  std::pair<int, int> double_support_frames{11, 19};
  std::pair<int, int> single_support_frames{38, 52};
  int lead_in_frames = 30;   // initial and final double support
  // Left-hand contacts against a wall at y = wall_y_mm, as half-open frame intervals.
  std::vector<std::pair<long, long>> left_hand_contacts;
  double wall_y_mm = 320.0;
};

// Walking on the floor (z = 0) along +x with the Humanoid40 model. Touchdowns
// approach slowly so that each contact begins exactly at its truth frame.
ScriptedMotion GenerateWalk(const KinematicModel& humanoid, const GaitOptions& options);

// GenerateWalk with as many single supports as needed, cut to `frames`.
ScriptedMotion WalkOfLength(const KinematicModel& humanoid, GaitOptions options, std::size_t frames);

// Mesh of the wall used by hand contacts (inner face at y = wall_y_mm).
TriangleMesh WallMesh(double wall_y_mm);

struct BundleSpec {
  std::string id;
  std::string category;
  std::string description;
  bool wall = false;
  bool moving_box = false;
  bool annotate = true;
};

// Writes manifest.json, subject.csv and object marker files into `dir`.
// Returns the manifest path.
std::filesystem::path WriteBundle(const std::filesystem::path& dir, const BundleSpec& spec,
                                  const KinematicModel& model, const ScriptedMotion& motion, double wall_y_mm = 320.0);

// Reference transition table as (from, to) -> (count, frames) for a corpus of
// 1323 transitions; frames follow the time percentages.
std::map<TransitionKey, std::pair<std::size_t, long>> ReferenceTransitionCells();
inline constexpr std::size_t kReferenceTransitions = 1323;

// Chained transition sequences whose non-boundary records realise `cells`
// exactly. Each sequence gets a leading and trailing boundary record.
std::vector<TransitionSequence> BuildCorpus(const std::map<TransitionKey, std::pair<std::size_t, long>>& cells,
                                            const std::string& category = "locomotion", std::uint64_t seed = 7);

}  // namespace supportseg::synth
