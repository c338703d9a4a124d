#include "supportseg/pipeline.hpp"

#include <atomic>
#include <cstdlib>
#include <map>
#include <ostream>
#include <thread>

#include <json.hpp>

namespace supportseg {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

void PipelineConfig::Validate() const {
  thresholds.Validate();
  auto positive = [](double v, const std::string& name) {
    if (!(v > 0.0)) throw ValidationError("'" + name + "' must be positive");
  };
  positive(fit.translation_step_mm, "translation_step_mm");
  positive(fit.angle_step_rad, "angle_step_rad");
  positive(fit.polish_scale, "polish_scale");
  positive(fit.optimizer.max_evaluations, "max_evaluations");
  if (fit.optimizer.ftol_rel < 0.0 || fit.optimizer.xtol_rel < 0.0 || fit.optimizer.ftol_abs < 0.0)
    throw ValidationError("optimizer tolerances must not be negative");
  if (max_airborne_frames < 0) throw ValidationError("'max_airborne_frames' must not be negative");
  positive(analytics.bin_width, "bin_width");
  positive(jobs, "jobs");
  if (out_dir.empty()) throw ValidationError("output directory is empty");
}

namespace {

class ConfigReader {
 public:
  ConfigReader(std::string file, fs::path base) : file_(std::move(file)), base_(std::move(base)) {}

  [[noreturn]] void Fail(const std::string& field, const std::string& what) const {
    throw ParseError(file_, 0, field, what);
  }

  void Section(const Json& root, const char* name, const std::function<void(const std::string&, const Json&)>& each) {
    const auto it = root.find(name);
    if (it == root.end()) return;
    if (!it->is_object()) Fail(name, "expected an object");
    for (const auto& [key, value] : it->items()) each(std::string(name) + "." + key, value);
  }

  double Number(const Json& v, const std::string& field) const {
    if (!v.is_number()) Fail(field, "expected a number");
    return v.get<double>();
  }
  int Int(const Json& v, const std::string& field) const {
    if (!v.is_number_integer()) Fail(field, "expected an integer");
    return v.get<int>();
  }
  bool Bool(const Json& v, const std::string& field) const {
    if (!v.is_boolean()) Fail(field, "expected true or false");
    return v.get<bool>();
  }
  fs::path Path(const Json& v, const std::string& field) const {
    if (!v.is_string()) Fail(field, "expected a path string");
    const fs::path p = v.get<std::string>();
    return p.is_absolute() || p.empty() ? p : base_ / p;
  }

 private:
  std::string file_;
  fs::path base_;
};

}  // namespace

void ApplyConfigDocument(PipelineConfig& c, const std::string& text, const fs::path& base_dir, const std::string& file) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    throw ParseError(file, 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + upto, '\n')), "",
                     "malformed config document");
  }
  ConfigReader r(file, base_dir);
  if (!root.is_object()) r.Fail("", "expected an object");
  static const std::set<std::string> sections = {"model", "thresholds", "optimizer", "segmentation", "analytics",
                                                 "output"};
  for (const auto& [key, value] : root.items())
    if (!sections.contains(key)) r.Fail(key, "unknown config section");

  if (root.contains("model") && !root["model"].is_null()) c.model_path = r.Path(root["model"], "model");

  DetectionThresholds& t = c.thresholds;
  r.Section(root, "thresholds", [&](const std::string& f, const Json& v) {
    const std::string k = f.substr(f.find('.') + 1);
    if (k == "dist_feet_mm") t.dist_feet_mm = r.Number(v, f);
    else if (k == "dist_hands_mm") t.dist_hands_mm = r.Number(v, f);
    else if (k == "dist_knees_mm") t.dist_knees_mm = r.Number(v, f);
    else if (k == "dist_elbows_mm") t.dist_elbows_mm = r.Number(v, f);
    else if (k == "vel_mm_per_s") t.vel_mm_per_s = r.Number(v, f);
    else if (k == "hold_frames") t.hold_frames = r.Int(v, f);
    else if (k == "smoothing_window_frames") t.smoothing_window_frames = r.Int(v, f);
    else if (k == "env_motion_max_mm") t.env_motion_max_mm = r.Number(v, f);
    else r.Fail(f, "unknown setting");
  });
  r.Section(root, "optimizer", [&](const std::string& f, const Json& v) {
    const std::string k = f.substr(f.find('.') + 1);
    if (k == "ftol_rel") c.fit.optimizer.ftol_rel = r.Number(v, f);
    else if (k == "xtol_rel") c.fit.optimizer.xtol_rel = r.Number(v, f);
    else if (k == "ftol_abs") c.fit.optimizer.ftol_abs = r.Number(v, f);
    else if (k == "max_evaluations") c.fit.optimizer.max_evaluations = r.Int(v, f);
    else if (k == "translation_step_mm") c.fit.translation_step_mm = r.Number(v, f);
    else if (k == "angle_step_rad") c.fit.angle_step_rad = r.Number(v, f);
    else if (k == "least_squares_start") c.fit.least_squares_start = r.Bool(v, f);
    else if (k == "polish_scale") c.fit.polish_scale = r.Number(v, f);
    else r.Fail(f, "unknown setting");
  });
  r.Section(root, "segmentation", [&](const std::string& f, const Json& v) {
    if (f == "segmentation.max_airborne_frames") c.max_airborne_frames = r.Int(v, f);
    else r.Fail(f, "unknown setting");
  });
  r.Section(root, "analytics", [&](const std::string& f, const Json& v) {
    const std::string k = f.substr(f.find('.') + 1);
    if (k == "bin_width") c.analytics.bin_width = r.Int(v, f);
    else if (k == "include_boundaries") c.analytics.include_boundaries = r.Bool(v, f);
    else if (k == "exclude_kneeling") c.analytics.exclude_kneeling = r.Bool(v, f);
    else if (k == "exclude_loops") c.analytics.exclude_loops = r.Bool(v, f);
    else if (k == "categories") {
      if (!v.is_array()) r.Fail(f, "expected an array of category names");
      c.analytics.categories.clear();
      for (const Json& cat : v) {
        if (!cat.is_string()) r.Fail(f, "expected an array of category names");
        c.analytics.categories.insert(cat.get<std::string>());
      }
    } else r.Fail(f, "unknown setting");
  });
  r.Section(root, "output", [&](const std::string& f, const Json& v) {
    const std::string k = f.substr(f.find('.') + 1);
    if (k == "directory") c.out_dir = r.Path(v, f);
    else if (k == "strict") c.strict = r.Bool(v, f);
    else if (k == "jobs") c.jobs = r.Int(v, f);
    else r.Fail(f, "unknown setting");
  });
}

void LoadConfigFile(PipelineConfig& config, const fs::path& path) {
  ApplyConfigDocument(config, ReadTextFile(path), path.parent_path(), path.string());
}

std::string EmitConfig(const PipelineConfig& c) {
  const DetectionThresholds& t = c.thresholds;
  Json root;
  root["model"] = c.model_path.empty() ? Json(nullptr) : Json(c.model_path.string());
  root["thresholds"] = {{"dist_feet_mm", t.dist_feet_mm},
                        {"dist_hands_mm", t.dist_hands_mm},
                        {"dist_knees_mm", t.dist_knees_mm},
                        {"dist_elbows_mm", t.dist_elbows_mm},
                        {"vel_mm_per_s", t.vel_mm_per_s},
                        {"hold_frames", t.hold_frames},
                        {"smoothing_window_frames", t.smoothing_window_frames},
                        {"env_motion_max_mm", t.env_motion_max_mm}};
  root["optimizer"] = {{"ftol_rel", c.fit.optimizer.ftol_rel},
                       {"xtol_rel", c.fit.optimizer.xtol_rel},
                       {"ftol_abs", c.fit.optimizer.ftol_abs},
                       {"max_evaluations", c.fit.optimizer.max_evaluations},
                       {"translation_step_mm", c.fit.translation_step_mm},
                       {"angle_step_rad", c.fit.angle_step_rad},
                       {"least_squares_start", c.fit.least_squares_start},
                       {"polish_scale", c.fit.polish_scale}};
  root["segmentation"] = {{"max_airborne_frames", c.max_airborne_frames}};
  root["analytics"] = {{"bin_width", c.analytics.bin_width},
                       {"include_boundaries", c.analytics.include_boundaries},
                       {"exclude_kneeling", c.analytics.exclude_kneeling},
                       {"exclude_loops", c.analytics.exclude_loops},
                       {"categories", c.analytics.categories}};
  root["output"] = {{"directory", c.out_dir.string()}, {"strict", c.strict}, {"jobs", c.jobs}};
  return root.dump(2) + "\n";
}

namespace {

double EnvNumber(const std::string& name, const char* value) {
  char* end = nullptr;
  const double d = std::strtod(value, &end);
  if (end == value || *end != '\0') throw ValidationError("environment variable " + name + " is not a number");
  return d;
}

int EnvInt(const std::string& name, const char* value) {
  char* end = nullptr;
  const long v = std::strtol(value, &end, 10);
  if (end == value || *end != '\0') throw ValidationError("environment variable " + name + " is not an integer");
  return static_cast<int>(v);
}

bool EnvBool(const std::string& name, const char* value) {
  const std::string v = value;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ValidationError("environment variable " + name + " is not a boolean");
}

}  // namespace

void ApplyEnvironment(PipelineConfig& c, const EnvLookup& lookup) {
  auto get = [&](const char* suffix, auto&& apply) {
    const std::string name = std::string(kEnvPrefix) + suffix;
    if (const char* v = lookup(name.c_str()); v && *v) apply(name, v);
  };
  get("MODEL", [&](const std::string&, const char* v) { c.model_path = v; });
  get("DIST_FEET", [&](const std::string& n, const char* v) { c.thresholds.dist_feet_mm = EnvNumber(n, v); });
  get("DIST_HANDS", [&](const std::string& n, const char* v) { c.thresholds.dist_hands_mm = EnvNumber(n, v); });
  get("DIST_KNEES", [&](const std::string& n, const char* v) { c.thresholds.dist_knees_mm = EnvNumber(n, v); });
  get("DIST_ELBOWS", [&](const std::string& n, const char* v) { c.thresholds.dist_elbows_mm = EnvNumber(n, v); });
  get("VEL", [&](const std::string& n, const char* v) { c.thresholds.vel_mm_per_s = EnvNumber(n, v); });
  get("HOLD_FRAMES", [&](const std::string& n, const char* v) { c.thresholds.hold_frames = EnvInt(n, v); });
  get("SMOOTH_WINDOW", [&](const std::string& n, const char* v) { c.thresholds.smoothing_window_frames = EnvInt(n, v); });
  get("BIN_WIDTH", [&](const std::string& n, const char* v) { c.analytics.bin_width = EnvInt(n, v); });
  get("INCLUDE_BOUNDARIES", [&](const std::string& n, const char* v) { c.analytics.include_boundaries = EnvBool(n, v); });
  get("EXCLUDE_LOOPS", [&](const std::string& n, const char* v) { c.analytics.exclude_loops = EnvBool(n, v); });
  get("EXCLUDE_KNEELING", [&](const std::string& n, const char* v) { c.analytics.exclude_kneeling = EnvBool(n, v); });
  get("MAX_AIRBORNE", [&](const std::string& n, const char* v) { c.max_airborne_frames = EnvInt(n, v); });
  get("STRICT", [&](const std::string& n, const char* v) { c.strict = EnvBool(n, v); });
  get("JOBS", [&](const std::string& n, const char* v) { c.jobs = EnvInt(n, v); });
  get("OUT", [&](const std::string&, const char* v) { c.out_dir = v; });
}

// ---- stages ----

TrajectoryDocument FitStage(const KinematicModel& model, const MotionBundle& bundle, const FitOptions& options) {
  std::vector<std::string> names;
  for (const MarkerAttachment& m : model.markers()) names.push_back(m.name);
  const MarkerSequence subject = SelectMarkers(bundle.subject, names, bundle.subject_file);
  TrajectoryDocument doc;
  doc.motion_id = bundle.id;
  doc.category = bundle.category;
  doc.subject = FitSequence(model, subject, options);
  doc.objects = BundleObjectTracks(bundle);
  return doc;
}

TimelineDocument DetectStage(const KinematicModel& model, const MotionBundle& bundle,
                             const TrajectoryDocument& trajectory, const DetectionThresholds& thresholds) {
  if (trajectory.motion_id != bundle.id)
    throw ValidationError("trajectory is for motion '" + trajectory.motion_id + "', bundle is '" + bundle.id + "'");
  TimelineDocument doc;
  doc.motion_id = bundle.id;
  doc.category = bundle.category;
  doc.timeline = DetectContacts(model, trajectory.subject, BundleElements(bundle, trajectory.objects), thresholds,
                                bundle.fps);
  return doc;
}

TransitionSequence SegmentStage(const TimelineDocument& timeline, long max_airborne_frames) {
  return BridgeAirborneGaps(SegmentTimeline(timeline.timeline, timeline.motion_id, timeline.category),
                            max_airborne_frames);
}

fs::path MotionDir(const fs::path& out_dir, const std::string& id) {
  if (id.empty() || id == "." || id == ".." || id.find_first_of("/\\") != std::string::npos)
    throw ValidationError("motion id '" + id + "' cannot be used as a directory name");
  return out_dir / "motions" / id;
}

MotionResult ProcessMotion(const KinematicModel& model, const fs::path& manifest, const PipelineConfig& config) {
  MotionResult r;
  r.manifest = manifest.string();
  try {
    const MotionBundle bundle = LoadMotionBundle(manifest);
    r.id = bundle.id;
    MotionDir(config.out_dir, bundle.id);
    r.trajectory = FitStage(model, bundle, config.fit);
    r.timeline = DetectStage(model, bundle, r.trajectory, config.thresholds);
    r.sequence = SegmentStage(r.timeline, config.max_airborne_frames);
    if (bundle.annotation) r.eval = CompareToAnnotation(r.sequence.Labels(), *bundle.annotation);
    r.ok = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

void WriteMotionOutputs(const MotionResult& r, const KinematicModel& model, const fs::path& out_dir) {
  const fs::path dir = MotionDir(out_dir, r.id);
  WriteTextFile(dir / "trajectory.json", EmitTrajectory(r.trajectory, model));
  WriteTextFile(dir / "timeline.json", EmitTimeline(r.timeline));
  WriteTextFile(dir / "sequence.json", EmitSequence(r.sequence));
  WriteTextFile(dir / "timeline.csv", EmitSequenceCsv(r.sequence));
  if (r.eval) WriteTextFile(dir / "eval.json", EmitEvalReport(*r.eval, r.id));
}

std::vector<NamedMixture> FitTransitionMixtures(const std::vector<TransitionSequence>& sequences,
                                                const StatsFilter& filter) {
  std::map<TransitionKey, std::vector<double>> durations;
  for (const TransitionSequence& s : sequences) {
    if (!filter.Accepts(s)) continue;
    for (const TransitionRecord& r : s.records) {
      if (r.boundary || !r.to || (filter.exclude_loops && r.loop())) continue;
      durations[{r.from.Label(), r.to->Label()}].push_back(static_cast<double>(r.duration_frames));
    }
  }
  std::vector<NamedMixture> out;
  for (const auto& [key, samples] : durations) {
    NamedMixture m;
    m.transition = key;
    m.samples = samples.size();
    try {
      m.fit = FitTwoNormalMixture(samples);
    } catch (const ValidationError& e) {
      m.skipped = e.what();
    }
    out.push_back(std::move(m));
  }
  return out;
}

namespace {

std::string HistogramFileName(const TransitionKey& key) { return key.first + "_to_" + key.second + ".csv"; }

}  // namespace

void WriteStatsOutputs(const std::vector<TransitionSequence>& sequences, const AnalyticsOptions& options,
                       const fs::path& out_dir) {
  const StatsFilter filter = options.Filter();
  const TransitionStats stats = TransitionTable(sequences, filter);
  WriteTextFile(out_dir / "table.csv", EmitTableCsv(stats));
  WriteTextFile(out_dir / "table_cells.csv", EmitTableCellsCsv(stats));

  // Per transition, one histogram per motion category.
  std::map<TransitionKey, std::map<std::string, std::vector<long>>> durations;
  for (const TransitionSequence& s : sequences) {
    if (!filter.Accepts(s)) continue;
    for (const TransitionRecord& r : s.records) {
      if (r.boundary || !r.to || (filter.exclude_loops && r.loop())) continue;
      durations[{r.from.Label(), r.to->Label()}][s.category].push_back(r.duration_frames);
    }
  }
  fs::remove_all(out_dir / "histograms");
  for (const auto& [key, by_category] : durations) {
    std::vector<Histogram> hs;
    for (const auto& [category, d] : by_category) hs.push_back(DurationHistogram(d, options.bin_width, category));
    WriteTextFile(out_dir / "histograms" / HistogramFileName(key), EmitHistogramCsv(hs));
  }
  WriteTextFile(out_dir / "mixtures.json", EmitMixtures(FitTransitionMixtures(sequences, filter)));
}

void WriteGraphOutputs(const std::vector<TransitionSequence>& sequences, const AnalyticsOptions& options,
                       const fs::path& out_dir) {
  const TransitionGraph graph = BuildTransitionGraph(sequences, options.include_boundaries, options.Filter());
  WriteTextFile(out_dir / "graph.dot", EmitGraphDot(graph));
  WriteTextFile(out_dir / "graph.json", EmitGraphJson(graph));
}

bool WriteCorpusOutputs(const std::vector<TransitionSequence>& sequences, const AnalyticsOptions& options,
                        const fs::path& out_dir, std::ostream& log) {
  bool table_ok = true;
  try {
    WriteStatsOutputs(sequences, options, out_dir);
  } catch (const ValidationError& e) {
    log << "stats: " << e.what() << "\n";
    table_ok = false;
  }
  WriteGraphOutputs(sequences, options, out_dir);
  return table_ok;
}

int RunPipeline(const PipelineConfig& config, const std::vector<fs::path>& manifests, std::ostream& log) {
  config.Validate();
  if (manifests.empty()) throw ValidationError("no motion bundles given");
  if (config.model_path.empty()) throw ValidationError("no model given (--model)");
  const KinematicModel model = LoadModelSpec(config.model_path);

  std::vector<MotionResult> results(manifests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < manifests.size(); i = next++) results[i] = ProcessMotion(model, manifests[i], config);
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), manifests.size());
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  std::set<std::string> ids;
  for (MotionResult& r : results) {
    if (r.ok && !ids.insert(r.id).second) {
      r.ok = false;
      r.error = "duplicate motion id '" + r.id + "'";
    }
  }

  std::size_t failed = 0;
  for (const MotionResult& r : results) {
    if (r.ok) continue;
    ++failed;
    log << r.manifest << ": " << r.error << "\n";
  }
  if (config.strict && failed > 0) {
    log << failed << " of " << results.size() << " motions failed; strict mode, nothing written\n";
    return 1;
  }
  if (failed == results.size()) {
    log << "no motion was processed successfully\n";
    return 1;
  }

  std::vector<TransitionSequence> sequences;
  Json summary = Json::array();
  std::string evaluation = "motion_id,n_annotated,n_detected,n_missed,n_incorrect\n";
  std::size_t tot_ann = 0, tot_det = 0, tot_missed = 0, tot_incorrect = 0;
  bool any_eval = false;
  for (const MotionResult& r : results) {
    Json entry{{"manifest", r.manifest}, {"id", r.id}, {"ok", r.ok}};
    if (!r.ok) {
      entry["error"] = r.error;
      summary.push_back(std::move(entry));
      continue;
    }
    summary.push_back(std::move(entry));
    WriteMotionOutputs(r, model, config.out_dir);
    sequences.push_back(r.sequence);
    if (r.eval) {
      any_eval = true;
      evaluation += r.id + "," + std::to_string(r.eval->n_annotated) + "," + std::to_string(r.eval->n_detected) + "," +
                    std::to_string(r.eval->n_missed) + "," + std::to_string(r.eval->n_incorrect) + "\n";
      tot_ann += r.eval->n_annotated;
      tot_det += r.eval->n_detected;
      tot_missed += r.eval->n_missed;
      tot_incorrect += r.eval->n_incorrect;
    }
  }
  if (any_eval) {
    evaluation += "total," + std::to_string(tot_ann) + "," + std::to_string(tot_det) + "," +
                  std::to_string(tot_missed) + "," + std::to_string(tot_incorrect) + "\n";
    WriteTextFile(config.out_dir / "evaluation.csv", evaluation);
  }
  WriteTextFile(config.out_dir / "summary.json", Json{{"motions", summary}}.dump(2) + "\n");
  WriteCorpusOutputs(sequences, config.analytics, config.out_dir, log);
  return 0;
}

}  // namespace supportseg
