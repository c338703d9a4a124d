#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "supportseg/contact_detection.hpp"

namespace supportseg {

// Laterality-collapsed support configuration.
struct SupportPose {
  int feet = 0;
  int hands = 0;
  int knees = 0;
  int elbows = 0;

  bool empty() const { return feet == 0 && hands == 0 && knees == 0 && elbows == 0; }
  // Canonical label: counts in the order Feet, Hands, Knees, Elbows joined by
  // '-', e.g. "2Feet-1Hand"; "None" when nothing supports.
  std::string Label() const;
  // Accepts canonical labels and any part order ("1Hand-1Foot").
  static SupportPose FromLabel(std::string_view label);

  auto operator<=>(const SupportPose&) const = default;
};

// Applies the knee-implies-foot rule. Non-canonical names are ignored.
SupportPose SupportPoseAt(const std::set<std::string>& supporting_segments);

// Sum over classes of |count difference|.
int ContactChangeCount(const SupportPose& a, const SupportPose& b);

struct TransitionRecord {
  SupportPose from;
  std::optional<SupportPose> to;  // empty for the final record of a motion
  long duration_frames = 0;
  long start_frame = 0;
  std::string motion_id;
  bool boundary = false;

  bool loop() const { return to && *to == from; }
};

struct TransitionSequence {
  std::string motion_id;
  std::string category;
  std::vector<TransitionRecord> records;

  // Visited pose labels in order.
  std::vector<std::string> Labels() const;
  long TotalFrames() const;
};

// Maximal runs of identical support pose become records.
TransitionSequence SegmentTimeline(const ContactTimeline& timeline, std::string motion_id = {},
                                   std::string category = {});

// Removes "None" runs shorter than max_airborne_frames that sit between two
// supported poses; their frames are added to the preceding record. Identical
// neighbours become a loop record. max_airborne_frames <= 0 is a no-op.
TransitionSequence BridgeAirborneGaps(const TransitionSequence& sequence, long max_airborne_frames);

enum class AlignmentOp { kMatch, kSubstitute, kMissed, kExtra };

struct AlignmentStep {
  AlignmentOp op;
  std::optional<std::size_t> annotated_index;
  std::optional<std::size_t> detected_index;
  std::string annotated_label;
  std::string detected_label;
};

struct EvalReport {
  std::size_t n_detected = 0;
  std::size_t n_annotated = 0;
  std::size_t n_missed = 0;       // annotated poses absent from the detection
  std::size_t n_incorrect = 0;    // n_substituted + n_extra
  std::size_t n_substituted = 0;
  std::size_t n_extra = 0;
  std::vector<AlignmentStep> trace;
  std::vector<std::string> discrepancies;
};

// Minimum edit-distance alignment of pose-label sequences. Among alignments of
// equal cost the one with fewest substitutions is chosen, which makes the
// missed/extra counts swap exactly when the arguments are swapped.
EvalReport CompareToAnnotation(const std::vector<std::string>& detected, const std::vector<std::string>& annotated);
EvalReport CompareToAnnotation(const TransitionSequence& detected, const TransitionSequence& annotated);

}  // namespace supportseg
