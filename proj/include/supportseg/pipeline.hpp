#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "supportseg/analytics.hpp"
#include "supportseg/contact_detection.hpp"
#include "supportseg/io.hpp"
#include "supportseg/marker_fit.hpp"

namespace supportseg {

struct AnalyticsOptions {
  int bin_width = 10;
  bool include_boundaries = true;  // transition graph only
  bool exclude_kneeling = true;
  bool exclude_loops = false;
  std::set<std::string> categories;

  StatsFilter Filter() const { return {categories, exclude_kneeling, exclude_loops}; }
};

struct PipelineConfig {
  std::filesystem::path model_path;
  DetectionThresholds thresholds;
  FitOptions fit;
  long max_airborne_frames = 0;
  AnalyticsOptions analytics;
  std::filesystem::path out_dir = "out";
  bool strict = false;
  int jobs = 1;

  // Throws ValidationError on non-positive numeric fields.
  void Validate() const;
};

// Merges a config document into `config`. Unknown keys are rejected. Relative
// paths resolve against `base_dir`.
void ApplyConfigDocument(PipelineConfig& config, const std::string& text, const std::filesystem::path& base_dir,
                         const std::string& file = {});
void LoadConfigFile(PipelineConfig& config, const std::filesystem::path& path);
std::string EmitConfig(const PipelineConfig& config);

inline constexpr const char* kEnvPrefix = "SUPPORTSEG_";
using EnvLookup = std::function<const char*(const char*)>;
// Reads SUPPORTSEG_<FLAG> for every flag, e.g. SUPPORTSEG_DIST_FEET.
void ApplyEnvironment(PipelineConfig& config, const EnvLookup& lookup);

// ---- stages ----

TrajectoryDocument FitStage(const KinematicModel& model, const MotionBundle& bundle, const FitOptions& options);
TimelineDocument DetectStage(const KinematicModel& model, const MotionBundle& bundle,
                             const TrajectoryDocument& trajectory, const DetectionThresholds& thresholds);
TransitionSequence SegmentStage(const TimelineDocument& timeline, long max_airborne_frames);

struct MotionResult {
  std::string id;
  std::string manifest;
  bool ok = false;
  std::string error;
  TrajectoryDocument trajectory;
  TimelineDocument timeline;
  TransitionSequence sequence;
  std::optional<EvalReport> eval;
};

// All stages for one motion, in memory. Failures are captured in the result.
MotionResult ProcessMotion(const KinematicModel& model, const std::filesystem::path& manifest,
                           const PipelineConfig& config);

// trajectory.json, timeline.json, sequence.json, timeline.csv and (with an
// annotation) eval.json under <out>/motions/<id>/.
void WriteMotionOutputs(const MotionResult& result, const KinematicModel& model, const std::filesystem::path& out_dir);

// table.csv, table_cells.csv, histograms/<from>_to_<to>.csv and mixtures.json.
// Throws ValidationError when nothing is left after filtering.
void WriteStatsOutputs(const std::vector<TransitionSequence>& sequences, const AnalyticsOptions& options,
                       const std::filesystem::path& out_dir);
// graph.dot and graph.json.
void WriteGraphOutputs(const std::vector<TransitionSequence>& sequences, const AnalyticsOptions& options,
                       const std::filesystem::path& out_dir);

// Corpus-level files: table.csv, table_cells.csv, histograms/*.csv,
// mixtures.json, graph.dot, graph.json. Returns false when the table could
// not be built (nothing left after filtering); graph files are still written.
bool WriteCorpusOutputs(const std::vector<TransitionSequence>& sequences, const AnalyticsOptions& options,
                        const std::filesystem::path& out_dir, std::ostream& log);

std::vector<NamedMixture> FitTransitionMixtures(const std::vector<TransitionSequence>& sequences,
                                                const StatsFilter& filter);

std::filesystem::path MotionDir(const std::filesystem::path& out_dir, const std::string& id);

// Processes every manifest, then the corpus. Returns the process exit status.
int RunPipeline(const PipelineConfig& config, const std::vector<std::filesystem::path>& manifests, std::ostream& log);

}  // namespace supportseg
