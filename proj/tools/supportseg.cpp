// supportseg: fit, detect, segment, stats, graph, eval and run.
#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "supportseg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace supportseg;

namespace {

struct Overrides {
  std::string config_file;
  std::optional<std::string> model;
  std::optional<double> dist_feet, dist_hands, dist_knees, dist_elbows, vel;
  std::optional<int> hold_frames, smooth_window, bin_width, jobs;
  std::optional<long> max_airborne;
  std::optional<bool> include_boundaries, exclude_loops, exclude_kneeling, strict;
  std::optional<std::string> out;
};

void AddCommonOptions(CLI::App& app, Overrides& o) {
  app.add_option("--config", o.config_file, "Config document (default: $SUPPORTSEG_CONFIG)");
  app.add_option("--model", o.model, "Model spec document");
  app.add_option("--dist-feet", o.dist_feet, "Foot distance threshold, mm");
  app.add_option("--dist-hands", o.dist_hands, "Hand distance threshold, mm");
  app.add_option("--dist-knees", o.dist_knees, "Knee distance threshold, mm");
  app.add_option("--dist-elbows", o.dist_elbows, "Elbow distance threshold, mm");
  app.add_option("--vel", o.vel, "Speed threshold, mm/s");
  app.add_option("--hold-frames", o.hold_frames, "Frames the speed must stay below --vel");
  app.add_option("--smooth-window", o.smooth_window, "Velocity smoothing window, frames (odd)");
  app.add_option("--max-airborne", o.max_airborne, "Bridge unsupported gaps shorter than this, frames");
  app.add_option("--bin-width", o.bin_width, "Histogram bin width, frames");
  app.add_flag("--include-boundaries{true}", o.include_boundaries, "Graph includes first/last poses");
  app.add_flag("--exclude-loops{true}", o.exclude_loops, "Drop pose-to-itself transitions from statistics");
  app.add_flag("--exclude-kneeling{true}", o.exclude_kneeling, "Drop kneeling motions from statistics");
  app.add_flag("--strict{true}", o.strict, "Fail the run if any motion fails");
  app.add_option("--jobs", o.jobs, "Motions processed in parallel");
  app.add_option("--out", o.out, "Output directory");
}

PipelineConfig ResolveConfig(const Overrides& o) {
  PipelineConfig c;
  std::string config_file = o.config_file;
  if (config_file.empty())
    if (const char* env = std::getenv("SUPPORTSEG_CONFIG")) config_file = env;
  if (!config_file.empty()) LoadConfigFile(c, config_file);
  ApplyEnvironment(c, [](const char* name) { return std::getenv(name); });
  if (o.model) c.model_path = *o.model;
  if (o.dist_feet) c.thresholds.dist_feet_mm = *o.dist_feet;
  if (o.dist_hands) c.thresholds.dist_hands_mm = *o.dist_hands;
  if (o.dist_knees) c.thresholds.dist_knees_mm = *o.dist_knees;
  if (o.dist_elbows) c.thresholds.dist_elbows_mm = *o.dist_elbows;
  if (o.vel) c.thresholds.vel_mm_per_s = *o.vel;
  if (o.hold_frames) c.thresholds.hold_frames = *o.hold_frames;
  if (o.smooth_window) c.thresholds.smoothing_window_frames = *o.smooth_window;
  if (o.max_airborne) c.max_airborne_frames = *o.max_airborne;
  if (o.bin_width) c.analytics.bin_width = *o.bin_width;
  if (o.include_boundaries) c.analytics.include_boundaries = *o.include_boundaries;
  if (o.exclude_loops) c.analytics.exclude_loops = *o.exclude_loops;
  if (o.exclude_kneeling) c.analytics.exclude_kneeling = *o.exclude_kneeling;
  if (o.strict) c.strict = *o.strict;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.out) c.out_dir = *o.out;
  c.Validate();
  return c;
}

KinematicModel RequireModel(const PipelineConfig& c) {
  if (c.model_path.empty()) throw ValidationError("no model given (--model)");
  return LoadModelSpec(c.model_path);
}

std::vector<TransitionSequence> LoadSequences(const std::vector<std::string>& files) {
  std::vector<TransitionSequence> out;
  for (const std::string& f : files) out.push_back(ParseSequence(ReadTextFile(f), f));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Support-pose segmentation of whole-body motion capture recordings"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  AddCommonOptions(app, o);

  std::vector<std::string> inputs;
  std::string trajectory_file, bundle_file, detected_file, annotated_file;

  CLI::App* run = app.add_subcommand("run", "Full pipeline over motion bundles");
  run->add_option("manifests", inputs, "Bundle manifests")->required()->check(CLI::ExistingFile);

  CLI::App* fit = app.add_subcommand("fit", "Reconstruct pose trajectories from markers");
  fit->add_option("manifests", inputs, "Bundle manifests")->required()->check(CLI::ExistingFile);

  CLI::App* detect = app.add_subcommand("detect", "Detect support contacts from a pose trajectory");
  detect->add_option("--bundle", bundle_file, "Bundle manifest")->required()->check(CLI::ExistingFile);
  detect->add_option("--trajectory", trajectory_file, "Trajectory document from `fit`")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* segment = app.add_subcommand("segment", "Segment contact timelines into support-pose transitions");
  segment->add_option("timelines", inputs, "Timeline documents from `detect`")->required()->check(CLI::ExistingFile);

  CLI::App* stats = app.add_subcommand("stats", "Transition table, histograms and mixture fits");
  stats->add_option("sequences", inputs, "Sequence documents")->required()->check(CLI::ExistingFile);

  CLI::App* graph = app.add_subcommand("graph", "Transition graph");
  graph->add_option("sequences", inputs, "Sequence documents")->required()->check(CLI::ExistingFile);

  CLI::App* eval = app.add_subcommand("eval", "Compare a detected sequence to an annotation");
  eval->add_option("--detected", detected_file, "Detected sequence document")->required()->check(CLI::ExistingFile);
  eval->add_option("--annotated", annotated_file, "Annotation: label list, sequence or manifest")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    const PipelineConfig config = ResolveConfig(o);

    if (*run) {
      std::vector<fs::path> manifests(inputs.begin(), inputs.end());
      return RunPipeline(config, manifests, std::cerr);
    }
    if (*fit) {
      const KinematicModel model = RequireModel(config);
      int failures = 0;
      for (const std::string& m : inputs) {
        try {
          const MotionBundle bundle = LoadMotionBundle(m);
          const TrajectoryDocument doc = FitStage(model, bundle, config.fit);
          WriteTextFile(MotionDir(config.out_dir, bundle.id) / "trajectory.json", EmitTrajectory(doc, model));
        } catch (const std::exception& e) {
          std::cerr << m << ": " << e.what() << "\n";
          ++failures;
          if (config.strict) return 1;
        }
      }
      return failures == static_cast<int>(inputs.size()) ? 1 : 0;
    }
    if (*detect) {
      const KinematicModel model = RequireModel(config);
      const MotionBundle bundle = LoadMotionBundle(bundle_file);
      const TrajectoryDocument traj = ParseTrajectory(ReadTextFile(trajectory_file), model, trajectory_file);
      const TimelineDocument doc = DetectStage(model, bundle, traj, config.thresholds);
      WriteTextFile(MotionDir(config.out_dir, doc.motion_id) / "timeline.json", EmitTimeline(doc));
      return 0;
    }
    if (*segment) {
      for (const std::string& f : inputs) {
        const TimelineDocument doc = ParseTimeline(ReadTextFile(f), f);
        const TransitionSequence seq = SegmentStage(doc, config.max_airborne_frames);
        const fs::path dir = MotionDir(config.out_dir, seq.motion_id);
        WriteTextFile(dir / "sequence.json", EmitSequence(seq));
        WriteTextFile(dir / "timeline.csv", EmitSequenceCsv(seq));
      }
      return 0;
    }
    if (*stats) {
      WriteStatsOutputs(LoadSequences(inputs), config.analytics, config.out_dir);
      return 0;
    }
    if (*graph) {
      WriteGraphOutputs(LoadSequences(inputs), config.analytics, config.out_dir);
      return 0;
    }
    if (*eval) {
      const TransitionSequence detected = ParseSequence(ReadTextFile(detected_file), detected_file);
      const std::vector<std::string> annotated = ParsePoseLabels(ReadTextFile(annotated_file), annotated_file);
      const std::string report = EmitEvalReport(CompareToAnnotation(detected.Labels(), annotated), detected.motion_id);
      if (o.out) {
        WriteTextFile(MotionDir(config.out_dir, detected.motion_id) / "eval.json", report);
      } else {
        std::cout << report;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "supportseg: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
