#include <doctest.h>

#include <sys/wait.h>

#include "helpers.hpp"
#include "supportseg/io.hpp"
#include "supportseg/synth.hpp"

using namespace supportseg;
namespace fs = std::filesystem;

namespace {

int Cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + CLI_PATH + "\" " + args + " >\"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string Q(const fs::path& p) { return "\"" + p.string() + "\""; }

struct Fixture {
  fs::path dir;
  std::vector<fs::path> manifests;
  std::string model;

  Fixture() : dir(testing::ScratchDir("cli")) {
    model = Q(testing::SourcePath("fixtures/humanoid40.json"));
    const KinematicModel h = synth::Humanoid40();
    for (int k = 0; k < 3; ++k) {
      synth::GaitOptions g;
      g.seed = 40 + static_cast<std::uint64_t>(k);
      g.single_supports = 2;
      synth::BundleSpec spec;
      spec.id = "motion_" + std::to_string(k);
      spec.category = "locomotion";
      if (k == 2) {
        g.speed_mm_per_frame = 0;
        g.left_hand_contacts = {{60, 120}};
        spec.category = "loco-manipulation";
        spec.wall = true;
      }
      manifests.push_back(synth::WriteBundle(dir / spec.id, spec, h, synth::GenerateWalk(h, g), g.wall_y_mm));
    }
  }

  std::string All() const {
    std::string s;
    for (const fs::path& m : manifests) s += " " + Q(m);
    return s;
  }
};

Fixture& Shared() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("run writes per-motion and corpus outputs") {
  Fixture& f = Shared();
  const fs::path out = f.dir / "run";
  REQUIRE(Cli("run --model " + f.model + " --out " + Q(out) + f.All(), f.dir / "run.log") == 0);
  for (int k = 0; k < 3; ++k) {
    const fs::path m = out / "motions" / ("motion_" + std::to_string(k));
    CHECK(fs::exists(m / "timeline.json"));
    const TimelineDocument tl = ParseTimeline(ReadTextFile(m / "timeline.json"));
    CHECK(tl.motion_id == "motion_" + std::to_string(k));
    CHECK(ParseSequence(ReadTextFile(m / "sequence.json")).records.size() >= 3);
  }
  CHECK(fs::exists(out / "table.csv"));
  CHECK(ReadTextFile(out / "table.csv").rfind("from,", 0) == 0);
  CHECK(ReadTextFile(out / "graph.dot").rfind("digraph transitions {", 0) == 0);
  CHECK(ReadTextFile(out / "evaluation.csv").find("total,") != std::string::npos);
}

TEST_CASE("stage subcommands reproduce run byte for byte") {
  Fixture& f = Shared();
  const fs::path run = f.dir / "run";
  REQUIRE(fs::exists(run / "table.csv"));
  const fs::path out = f.dir / "stages";
  const std::string common = " --model " + f.model + " --out " + Q(out);
  REQUIRE(Cli("fit" + common + f.All(), f.dir / "fit.log") == 0);
  std::string timelines, sequences;
  for (int k = 0; k < 3; ++k) {
    const std::string id = "motion_" + std::to_string(k);
    const fs::path m = out / "motions" / id;
    REQUIRE(Cli("detect" + common + " --bundle " + Q(f.manifests[k]) + " --trajectory " + Q(m / "trajectory.json"),
                f.dir / "detect.log") == 0);
    timelines += " " + Q(m / "timeline.json");
    sequences += " " + Q(m / "sequence.json");
  }
  REQUIRE(Cli("segment" + common + timelines, f.dir / "segment.log") == 0);
  REQUIRE(Cli("stats" + common + sequences, f.dir / "stats.log") == 0);
  REQUIRE(Cli("graph" + common + sequences, f.dir / "graph.log") == 0);
  for (int k = 0; k < 3; ++k) {
    const std::string id = "motion_" + std::to_string(k);
    for (const char* file : {"trajectory.json", "timeline.json", "sequence.json", "timeline.csv"})
      CHECK_MESSAGE(ReadTextFile(out / "motions" / id / file) == ReadTextFile(run / "motions" / id / file), id, "/",
                    file);
  }
  for (const char* file : {"table.csv", "table_cells.csv", "mixtures.json", "graph.dot", "graph.json"})
    CHECK_MESSAGE(ReadTextFile(out / file) == ReadTextFile(run / file), file);
}

TEST_CASE("eval on identical sequences reports zeros") {
  Fixture& f = Shared();
  const fs::path seq = f.dir / "run" / "motions" / "motion_0" / "sequence.json";
  REQUIRE(fs::exists(seq));
  REQUIRE(Cli("eval --detected " + Q(seq) + " --annotated " + Q(seq), f.dir / "eval.json") == 0);
  const std::string report = ReadTextFile(f.dir / "eval.json");
  CHECK(report.find("\"n_missed\": 0") != std::string::npos);
  CHECK(report.find("\"n_incorrect\": 0") != std::string::npos);
  REQUIRE(Cli("eval --detected " + Q(seq) + " --annotated " + Q(f.manifests[0]), f.dir / "eval2.json") == 0);
  CHECK(ReadTextFile(f.dir / "eval2.json") == report);
}

TEST_CASE("negative threshold fails before any processing") {
  Fixture& f = Shared();
  const fs::path out = f.dir / "negative";
  CHECK(Cli("run --model " + f.model + " --dist-feet -5 --out " + Q(out) + f.All(), f.dir / "neg.log") == 2);
  CHECK_FALSE(fs::exists(out));
  CHECK(ReadTextFile(f.dir / "neg.log").find("dist_feet") != std::string::npos);
  CHECK(Cli("run --model " + f.model + " --smooth-window 4 --out " + Q(out) + f.All(), f.dir / "neg.log") == 2);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("strict mode with a corrupt bundle exits nonzero and writes nothing") {
  Fixture& f = Shared();
  const fs::path bad = f.dir / "corrupt";
  fs::create_directories(bad);
  fs::copy_file(f.manifests[0], bad / "manifest.json", fs::copy_options::overwrite_existing);
  WriteTextFile(bad / "subject.csv", "frame,marker_name,x,y,z\n0,LASI,1,2,oops\n");
  const fs::path out = f.dir / "strict";
  CHECK(Cli("run --strict --model " + f.model + " --out " + Q(out) + " " + Q(f.manifests[1]) + " " +
                Q(bad / "manifest.json"),
            f.dir / "strict.log") != 0);
  CHECK_FALSE(fs::exists(out));
  const std::string log = ReadTextFile(f.dir / "strict.log");
  CHECK(log.find("subject.csv:2: field 'z'") != std::string::npos);
  CHECK(fs::exists(f.manifests[1]));
}

TEST_CASE("stats with --exclude-loops drops loop transitions") {
  Fixture& f = Shared();
  const std::vector<TransitionSequence> corpus = synth::BuildCorpus(synth::ReferenceTransitionCells());
  std::string files;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    TransitionSequence s = corpus[i];
    s.motion_id = "c" + std::to_string(i);
    const fs::path p = f.dir / "corpus" / (s.motion_id + ".json");
    WriteTextFile(p, EmitSequence(s));
    files += " " + Q(p);
  }
  REQUIRE(Cli("stats --out " + Q(f.dir / "with_loops") + files, f.dir / "loops.log") == 0);
  REQUIRE(Cli("stats --exclude-loops --out " + Q(f.dir / "no_loops") + files, f.dir / "loops.log") == 0);
  const std::string with = ReadTextFile(f.dir / "with_loops" / "table_cells.csv");
  const std::string without = ReadTextFile(f.dir / "no_loops" / "table_cells.csv");
  CHECK(with.find("\n1Foot,1Foot,58,") != std::string::npos);
  CHECK(with.find("\n1Foot,2Feet,303,") != std::string::npos);
  CHECK(with.find("\n1Foot,2Feet,303,13840,22.90,") != std::string::npos);
  CHECK(without.find("\n1Foot,1Foot,") == std::string::npos);
  CHECK(without.find("\n1Foot-1Hand,1Foot-1Hand,") == std::string::npos);
  CHECK(without.find("\n1Foot,2Feet,303,") != std::string::npos);
  CHECK_FALSE(fs::exists(f.dir / "no_loops" / "histograms" / "1Foot_to_1Foot.csv"));
  CHECK(fs::exists(f.dir / "with_loops" / "histograms" / "1Foot_to_1Foot.csv"));
}

TEST_CASE("usage errors") {
  Fixture& f = Shared();
  CHECK(Cli("", f.dir / "usage.log") != 0);
  CHECK(Cli("run", f.dir / "usage.log") != 0);
  CHECK(Cli("run /no/such/manifest.json", f.dir / "usage.log") != 0);
  CHECK(Cli("--help", f.dir / "usage.log") == 0);
  CHECK(ReadTextFile(f.dir / "usage.log").find("segment") != std::string::npos);
}
