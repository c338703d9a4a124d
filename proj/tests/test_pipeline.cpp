#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "supportseg/pipeline.hpp"
#include "supportseg/synth.hpp"

using namespace supportseg;
namespace fs = std::filesystem;

namespace {

PipelineConfig FromText(const std::string& text) {
  PipelineConfig c;
  ApplyConfigDocument(c, text, "/base", "c.json");
  return c;
}

std::string ConfigField(const std::string& text) {
  try {
    FromText(text);
  } catch (const ParseError& e) {
    CHECK(e.file() == "c.json");
    return e.field();
  }
  FAIL("no ParseError thrown");
  return {};
}

fs::path WalkBundle(const fs::path& dir, const std::string& id, std::uint64_t seed) {
  synth::GaitOptions g;
  g.seed = seed;
  g.single_supports = 2;
  const KinematicModel h = synth::Humanoid40();
  synth::BundleSpec spec;
  spec.id = id;
  spec.category = "locomotion";
  return synth::WriteBundle(dir / id, spec, h, synth::GenerateWalk(h, g));
}

}  // namespace

TEST_CASE("shipped default config equals the built-in defaults") {
  PipelineConfig c;
  c.model_path = "../fixtures/humanoid40.json";
  CHECK(EmitConfig(c) == ReadTextFile(testing::SourcePath("config/default.json")));

  PipelineConfig loaded;
  LoadConfigFile(loaded, testing::SourcePath("config/default.json"));
  CHECK(fs::exists(loaded.model_path));
  CHECK(loaded.out_dir == testing::SourcePath("config") / "out");
  loaded.model_path = c.model_path;
  loaded.out_dir = c.out_dir;
  CHECK(EmitConfig(loaded) == EmitConfig(c));
  CHECK_NOTHROW(loaded.Validate());
}

TEST_CASE("config documents override defaults section by section") {
  const PipelineConfig c = FromText(R"({
    "model": "models/h.json",
    "thresholds": {"dist_feet_mm": 12.5, "hold_frames": 7},
    "optimizer": {"max_evaluations": 800, "least_squares_start": false},
    "segmentation": {"max_airborne_frames": 6},
    "analytics": {"exclude_loops": true, "categories": ["balancing", "locomotion"]},
    "output": {"directory": "/abs/out", "strict": true, "jobs": 3}
  })");
  CHECK(c.model_path == fs::path("/base/models/h.json"));
  CHECK(c.thresholds.dist_feet_mm == 12.5);
  CHECK(c.thresholds.dist_hands_mm == 15.0);
  CHECK(c.thresholds.hold_frames == 7);
  CHECK(c.fit.optimizer.max_evaluations == 800);
  CHECK_FALSE(c.fit.least_squares_start);
  CHECK(c.max_airborne_frames == 6);
  CHECK(c.analytics.exclude_loops);
  CHECK(c.analytics.exclude_kneeling);
  CHECK(c.analytics.categories == std::set<std::string>{"balancing", "locomotion"});
  CHECK(c.out_dir == fs::path("/abs/out"));
  CHECK(c.strict);
  CHECK(c.jobs == 3);

  PipelineConfig layered = c;
  ApplyConfigDocument(layered, R"({"thresholds": {"hold_frames": 3}})", "/other");
  CHECK(layered.thresholds.hold_frames == 3);
  CHECK(layered.thresholds.dist_feet_mm == 12.5);
  CHECK(layered.model_path == c.model_path);
  CHECK(FromText(EmitConfig(c)).thresholds.hold_frames == 7);
}

TEST_CASE("config errors name the offending key") {
  CHECK(ConfigField(R"({"threshold": {}})") == "threshold");
  CHECK(ConfigField(R"({"thresholds": {"dist_toes_mm": 3}})") == "thresholds.dist_toes_mm");
  CHECK(ConfigField(R"({"thresholds": {"vel_mm_per_s": "fast"}})") == "thresholds.vel_mm_per_s");
  CHECK(ConfigField(R"({"thresholds": {"hold_frames": 2.5}})") == "thresholds.hold_frames");
  CHECK(ConfigField(R"({"thresholds": 3})") == "thresholds");
  CHECK(ConfigField(R"({"analytics": {"categories": [1]}})") == "analytics.categories");
  CHECK(ConfigField(R"({"output": {"strict": "yes"}})") == "output.strict");
  CHECK(ConfigField(R"({"model": 4})") == "model");
  try {
    FromText("{\n\"thresholds\": {\n}}}");
    FAIL("accepted malformed config");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("validation rejects bad numbers") {
  PipelineConfig c = FromText(R"({"thresholds": {"dist_knees_mm": -5}})");
  CHECK_THROWS_AS(c.Validate(), ValidationError);
  c = {};
  c.thresholds.smoothing_window_frames = 6;
  CHECK_THROWS_AS(c.Validate(), ValidationError);
  c = {};
  c.jobs = 0;
  CHECK_THROWS_AS(c.Validate(), ValidationError);
  c = {};
  c.max_airborne_frames = -1;
  CHECK_THROWS_AS(c.Validate(), ValidationError);
  c = {};
  c.fit.optimizer.ftol_rel = -1e-3;
  CHECK_THROWS_AS(c.Validate(), ValidationError);
  c = {};
  c.fit.polish_scale = 0;
  CHECK_THROWS_AS(c.Validate(), ValidationError);
  c = {};
  c.analytics.bin_width = 0;
  CHECK_THROWS_AS(c.Validate(), ValidationError);
  CHECK_NOTHROW(PipelineConfig{}.Validate());
}

TEST_CASE("environment variables") {
  const std::map<std::string, std::string> env = {{"SUPPORTSEG_DIST_FEET", "11"},
                                                  {"SUPPORTSEG_VEL", "250.5"},
                                                  {"SUPPORTSEG_HOLD_FRAMES", "4"},
                                                  {"SUPPORTSEG_EXCLUDE_LOOPS", "yes"},
                                                  {"SUPPORTSEG_EXCLUDE_KNEELING", "0"},
                                                  {"SUPPORTSEG_OUT", "/tmp/x"},
                                                  {"SUPPORTSEG_DIST_HANDS", ""},
                                                  {"DIST_KNEES", "1"}};
  const auto lookup = [&](const char* name) -> const char* {
    const auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  };
  PipelineConfig c;
  ApplyEnvironment(c, lookup);
  CHECK(c.thresholds.dist_feet_mm == 11.0);
  CHECK(c.thresholds.vel_mm_per_s == 250.5);
  CHECK(c.thresholds.hold_frames == 4);
  CHECK(c.thresholds.dist_hands_mm == 15.0);
  CHECK(c.thresholds.dist_knees_mm == 35.0);
  CHECK(c.analytics.exclude_loops);
  CHECK_FALSE(c.analytics.exclude_kneeling);
  CHECK(c.out_dir == fs::path("/tmp/x"));

  const auto bad = [](const char* name) -> const char* {
    return std::string(name) == "SUPPORTSEG_HOLD_FRAMES" ? "five" : nullptr;
  };
  CHECK_THROWS_AS(ApplyEnvironment(c, bad), ValidationError);
  const auto bad_bool = [](const char* name) -> const char* {
    return std::string(name) == "SUPPORTSEG_STRICT" ? "maybe" : nullptr;
  };
  CHECK_THROWS_AS(ApplyEnvironment(c, bad_bool), ValidationError);
}

TEST_CASE("motion directories") {
  CHECK(MotionDir("/o", "walk_01") == fs::path("/o/motions/walk_01"));
  CHECK_THROWS_AS(MotionDir("/o", ""), ValidationError);
  CHECK_THROWS_AS(MotionDir("/o", ".."), ValidationError);
  CHECK_THROWS_AS(MotionDir("/o", "a/b"), ValidationError);
}

TEST_CASE("mixtures are fitted per transition and skipped below four samples") {
  TransitionSequence s;
  s.category = "locomotion";
  const auto rec = [](const char* from, const char* to, long d) {
    TransitionRecord r;
    r.from = SupportPose::FromLabel(from);
    r.to = SupportPose::FromLabel(to);
    r.duration_frames = d;
    return r;
  };
  for (long d : {12, 14, 40, 45, 50}) s.records.push_back(rec("1Foot", "2Feet", d));
  s.records.push_back(rec("2Feet", "1Foot", 15));
  const std::vector<NamedMixture> m = FitTransitionMixtures({s}, {});
  REQUIRE(m.size() == 2);
  CHECK(m[0].transition == TransitionKey{"1Foot", "2Feet"});
  CHECK(m[0].fit.has_value());
  CHECK(m[0].samples == 5);
  CHECK_FALSE(m[1].fit.has_value());
  CHECK_FALSE(m[1].skipped.empty());
}

TEST_CASE("full pipeline on synthetic bundles") {
  const fs::path dir = testing::ScratchDir("pipeline_run");
  const fs::path a = WalkBundle(dir, "walk_a", 21);
  const fs::path b = WalkBundle(dir, "walk_b", 22);
  WriteTextFile(dir / "broken" / "manifest.json", "{\"id\": \"broken\"");

  PipelineConfig c;
  c.model_path = testing::SourcePath("fixtures/humanoid40.json");
  c.out_dir = dir / "out";
  c.jobs = 2;
  std::ostringstream log;
  CHECK(RunPipeline(c, {a, dir / "broken" / "manifest.json", b}, log) == 0);
  CHECK(log.str().find("broken/manifest.json") != std::string::npos);
  for (const char* id : {"walk_a", "walk_b"}) {
    for (const char* f : {"trajectory.json", "timeline.json", "sequence.json", "timeline.csv", "eval.json"})
      CHECK(fs::exists(c.out_dir / "motions" / id / f));
  }
  for (const char* f : {"table.csv", "table_cells.csv", "mixtures.json", "graph.dot", "graph.json", "summary.json",
                        "evaluation.csv"})
    CHECK(fs::exists(c.out_dir / f));
  CHECK(fs::exists(c.out_dir / "histograms" / "1Foot_to_2Feet.csv"));
  const std::string evaluation = ReadTextFile(c.out_dir / "evaluation.csv");
  CHECK(evaluation.find("walk_a,5,5,0,0\n") != std::string::npos);
  CHECK(evaluation.find("total,10,10,0,0\n") != std::string::npos);

  const TransitionSequence seq = ParseSequence(ReadTextFile(c.out_dir / "motions" / "walk_a" / "sequence.json"));
  CHECK(seq.Labels() == std::vector<std::string>{"2Feet", "1Foot", "2Feet", "1Foot", "2Feet"});

  {
    PipelineConfig s = c;
    s.strict = true;
    s.out_dir = dir / "strict_out";
    std::ostringstream slog;
    CHECK(RunPipeline(s, {a, dir / "broken" / "manifest.json"}, slog) == 1);
    CHECK_FALSE(fs::exists(s.out_dir));
  }
  {
    PipelineConfig s = c;
    s.out_dir = dir / "none_out";
    std::ostringstream slog;
    CHECK(RunPipeline(s, {dir / "broken" / "manifest.json"}, slog) == 1);
    CHECK_FALSE(fs::exists(s.out_dir));
  }
  {
    std::ostringstream slog;
    PipelineConfig s = c;
    s.out_dir = dir / "dup_out";
    CHECK(RunPipeline(s, {a, a}, slog) == 0);
    CHECK(slog.str().find("duplicate motion id 'walk_a'") != std::string::npos);
  }
}

TEST_CASE("pipeline rejects invalid settings before reading any bundle") {
  PipelineConfig c;
  c.model_path = "/does/not/exist.json";
  c.thresholds.vel_mm_per_s = -1;
  std::ostringstream log;
  CHECK_THROWS_AS(RunPipeline(c, {"/does/not/exist/manifest.json"}, log), ValidationError);
  c.thresholds.vel_mm_per_s = 200;
  CHECK_THROWS_AS(RunPipeline(c, {}, log), ValidationError);
  c.model_path.clear();
  CHECK_THROWS_AS(RunPipeline(c, {"/x"}, log), ValidationError);
}
