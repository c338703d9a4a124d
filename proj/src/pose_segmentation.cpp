#include "supportseg/pose_segmentation.hpp"

#include <algorithm>
#include <charconv>

namespace supportseg {
namespace {

struct PartName {
  const char* singular;
  const char* plural;
};

constexpr PartName kParts[] = {{"Foot", "Feet"}, {"Hand", "Hands"}, {"Knee", "Knees"}, {"Elbow", "Elbows"}};

int* CountFor(SupportPose& p, std::size_t part) {
  switch (part) {
    case 0: return &p.feet;
    case 1: return &p.hands;
    case 2: return &p.knees;
    default: return &p.elbows;
  }
}

int CountOf(const SupportPose& p, std::size_t part) {
  switch (part) {
    case 0: return p.feet;
    case 1: return p.hands;
    case 2: return p.knees;
    default: return p.elbows;
  }
}

}  // namespace

std::string SupportPose::Label() const {
  if (empty()) return "None";
  std::string out;
  for (std::size_t part = 0; part < 4; ++part) {
    const int n = CountOf(*this, part);
    if (n == 0) continue;
    if (!out.empty()) out += '-';
    out += std::to_string(n);
    out += n == 1 ? kParts[part].singular : kParts[part].plural;
  }
  return out;
}

SupportPose SupportPose::FromLabel(std::string_view label) {
  SupportPose pose;
  if (label == "None") return pose;
  if (label.empty()) throw ValidationError("empty support pose label");
  std::size_t start = 0;
  while (start <= label.size()) {
    const std::size_t dash = std::min(label.find('-', start), label.size());
    const std::string_view token = label.substr(start, dash - start);
    int count = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), count);
    const std::string_view name(ptr, static_cast<std::size_t>(token.data() + token.size() - ptr));
    bool matched = false;
    if (ec == std::errc() && count >= 1 && count <= 2) {
      for (std::size_t part = 0; part < 4; ++part) {
        const char* expected = count == 1 ? kParts[part].singular : kParts[part].plural;
        if (name == expected) {
          int* slot = CountFor(pose, part);
          if (*slot != 0) throw ValidationError("support pose label '" + std::string(label) + "' repeats a part");
          *slot = count;
          matched = true;
          break;
        }
      }
    }
    if (!matched) throw ValidationError("invalid support pose label '" + std::string(label) + "'");
    start = dash + 1;
  }
  if (pose.knees > pose.feet)
    throw ValidationError("support pose label '" + std::string(label) + "' has more knees than feet");
  return pose;
}

SupportPose SupportPoseAt(const std::set<std::string>& segments) {
  bool foot[2] = {false, false}, hand[2] = {false, false}, knee[2] = {false, false}, elbow[2] = {false, false};
  for (const std::string& name : segments) {
    const auto cls = SupportSegmentClass(name);
    const auto side = SupportSegmentSide(name);
    if (!cls || !side) continue;
    const int s = *side == Side::kLeft ? 0 : 1;
    switch (*cls) {
      case SegmentClass::kFoot: foot[s] = true; break;
      case SegmentClass::kHand: hand[s] = true; break;
      case SegmentClass::kKnee: knee[s] = foot[s] = true; break;
      case SegmentClass::kElbow: elbow[s] = true; break;
    }
  }
  return {foot[0] + foot[1], hand[0] + hand[1], knee[0] + knee[1], elbow[0] + elbow[1]};
}

int ContactChangeCount(const SupportPose& a, const SupportPose& b) {
  return std::abs(a.feet - b.feet) + std::abs(a.hands - b.hands) + std::abs(a.knees - b.knees) +
         std::abs(a.elbows - b.elbows);
}

std::vector<std::string> TransitionSequence::Labels() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const TransitionRecord& r : records) out.push_back(r.from.Label());
  return out;
}

long TransitionSequence::TotalFrames() const {
  long total = 0;
  for (const TransitionRecord& r : records) total += r.duration_frames;
  return total;
}

TransitionSequence SegmentTimeline(const ContactTimeline& timeline, std::string motion_id, std::string category) {
  if (timeline.size() == 0) throw ValidationError("contact timeline is empty");
  TransitionSequence seq;
  seq.motion_id = std::move(motion_id);
  seq.category = std::move(category);

  std::vector<SupportPose> poses;
  poses.reserve(timeline.size());
  for (const auto& frame : timeline.contacts) {
    std::set<std::string> segments;
    for (const ContactPair& c : frame) segments.insert(c.segment);
    poses.push_back(SupportPoseAt(segments));
  }

  std::size_t start = 0;
  while (start < poses.size()) {
    std::size_t end = start + 1;
    while (end < poses.size() && poses[end] == poses[start]) ++end;
    TransitionRecord r;
    r.from = poses[start];
    if (end < poses.size()) r.to = poses[end];
    r.duration_frames = static_cast<long>(end - start);
    r.start_frame = timeline.frames[start];
    r.motion_id = seq.motion_id;
    seq.records.push_back(std::move(r));
    start = end;
  }
  seq.records.front().boundary = true;
  seq.records.back().boundary = true;
  return seq;
}

TransitionSequence BridgeAirborneGaps(const TransitionSequence& sequence, long max_airborne_frames) {
  if (max_airborne_frames <= 0) return sequence;
  TransitionSequence out = sequence;
  out.records.clear();
  for (std::size_t i = 0; i < sequence.records.size(); ++i) {
    const TransitionRecord& r = sequence.records[i];
    const bool bridgeable = r.from.empty() && !out.records.empty() && r.to && !r.to->empty() &&
                            r.duration_frames < max_airborne_frames;
    if (bridgeable) {
      out.records.back().to = r.to;
      out.records.back().duration_frames += r.duration_frames;
      continue;
    }
    out.records.push_back(r);
  }
  return out;
}

EvalReport CompareToAnnotation(const std::vector<std::string>& detected, const std::vector<std::string>& annotated) {
  if (detected.empty() || annotated.empty()) throw ValidationError("cannot compare empty pose sequences");
  const std::size_t n = annotated.size();
  const std::size_t m = detected.size();
  struct Cost {
    std::size_t edits = 0;
    std::size_t substitutions = 0;
    auto operator<=>(const Cost&) const = default;
    Cost operator+(const Cost& o) const { return {edits + o.edits, substitutions + o.substitutions}; }
  };
  std::vector<std::vector<Cost>> d(n + 1, std::vector<Cost>(m + 1));
  for (std::size_t i = 1; i <= n; ++i) d[i][0] = {i, 0};
  for (std::size_t j = 1; j <= m; ++j) d[0][j] = {j, 0};
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const Cost diag = d[i - 1][j - 1] + (annotated[i - 1] == detected[j - 1] ? Cost{0, 0} : Cost{1, 1});
      d[i][j] = std::min({diag, d[i - 1][j] + Cost{1, 0}, d[i][j - 1] + Cost{1, 0}});
    }
  }

  EvalReport report;
  report.n_annotated = n;
  report.n_detected = m;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = annotated[i - 1] == detected[j - 1];
      if (d[i][j] == d[i - 1][j - 1] + (same ? Cost{0, 0} : Cost{1, 1})) {
        report.trace.push_back({same ? AlignmentOp::kMatch : AlignmentOp::kSubstitute, i - 1, j - 1, annotated[i - 1],
                                detected[j - 1]});
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && d[i][j] == d[i - 1][j] + Cost{1, 0}) {
      report.trace.push_back({AlignmentOp::kMissed, i - 1, std::nullopt, annotated[i - 1], ""});
      --i;
      continue;
    }
    report.trace.push_back({AlignmentOp::kExtra, std::nullopt, j - 1, "", detected[j - 1]});
    --j;
  }
  std::reverse(report.trace.begin(), report.trace.end());

  for (const AlignmentStep& step : report.trace) {
    switch (step.op) {
      case AlignmentOp::kMatch: break;
      case AlignmentOp::kSubstitute:
        ++report.n_substituted;
        report.discrepancies.push_back("i: detected " + step.detected_label + " instead of " + step.annotated_label +
                                       " at detected pose " + std::to_string(*step.detected_index));
        break;
      case AlignmentOp::kMissed:
        ++report.n_missed;
        report.discrepancies.push_back("m: " + step.annotated_label + " at annotated pose " +
                                       std::to_string(*step.annotated_index));
        break;
      case AlignmentOp::kExtra:
        ++report.n_extra;
        report.discrepancies.push_back("i: extra " + step.detected_label + " at detected pose " +
                                       std::to_string(*step.detected_index));
        break;
    }
  }
  report.n_incorrect = report.n_substituted + report.n_extra;
  return report;
}

EvalReport CompareToAnnotation(const TransitionSequence& detected, const TransitionSequence& annotated) {
  return CompareToAnnotation(detected.Labels(), annotated.Labels());
}

}  // namespace supportseg
