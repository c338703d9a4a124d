#include <doctest.h>

#include "helpers.hpp"
#include "supportseg/analytics.hpp"
#include "supportseg/io.hpp"
#include "supportseg/synth.hpp"

using namespace supportseg;

TEST_CASE("table cells reproduce the reference percentages") {
  const auto cells = synth::ReferenceTransitionCells();
  CHECK(cells.size() == 23);
  std::size_t count = 0;
  for (const auto& [key, cell] : cells) {
    count += cell.first;
    CHECK(cell.first >= 1);
    CHECK(cell.second >= static_cast<long>(cell.first));
  }
  CHECK(count == synth::kReferenceTransitions);
  CHECK(count == 1323);
  const auto pct = [&](const char* from, const char* to) {
    return 100.0 * static_cast<double>(cells.at({from, to}).first) / 1323.0;
  };
  CHECK(std::abs(pct("1Foot", "2Feet") - 22.90) < 0.005);
  CHECK(std::abs(pct("2Feet", "1Foot") - 16.02) < 0.005);
  CHECK(std::abs(pct("1Foot-1Hand", "2Feet-1Hand") - 12.24) < 0.005);
  CHECK(std::abs(pct("1Foot", "1Foot") - 4.38) < 0.005);
  CHECK_FALSE(cells.contains({"2Feet", "2Feet"}));
  CHECK_FALSE(cells.contains({"1Foot", "2Feet-2Hands"}));
}

TEST_CASE("synthetic corpus realises the cells exactly") {
  const auto cells = synth::ReferenceTransitionCells();
  const std::vector<TransitionSequence> corpus = synth::BuildCorpus(cells);
  REQUIRE_FALSE(corpus.empty());
  for (const TransitionSequence& s : corpus) {
    REQUIRE(s.records.size() >= 3);
    CHECK(s.records.front().boundary);
    CHECK(s.records.back().boundary);
    CHECK_FALSE(s.records.back().to.has_value());
    for (std::size_t i = 0; i + 1 < s.records.size(); ++i) {
      CHECK(*s.records[i].to == s.records[i + 1].from);
      CHECK(s.records[i + 1].start_frame == s.records[i].start_frame + s.records[i].duration_frames);
    }
    for (std::size_t i = 1; i + 1 < s.records.size(); ++i) CHECK_FALSE(s.records[i].boundary);
  }
  StatsFilter all;
  const TransitionStats stats = TransitionTable(corpus, all);
  CHECK(stats.n_transitions == 1323);
  REQUIRE(stats.cells.size() == cells.size());
  for (const auto& [key, cell] : cells) {
    CHECK(stats.cells.at(key).count == cell.first);
    CHECK(stats.cells.at(key).frames == cell.second);
  }
  CHECK(std::abs(stats.cells.at({"1Foot", "2Feet"}).appearance_pct - 22.90) < 0.01);
  CHECK(std::abs(stats.cells.at({"1Foot", "2Feet"}).time_pct - 25.56) < 0.01);
  CHECK(std::abs(stats.pose_totals.at("1Foot").appearance_pct - 36.81) < 0.05);
  CHECK(stats.SortedPoses().front() == "1Foot");

  const auto again = synth::BuildCorpus(cells);
  REQUIRE(again.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) CHECK(again[i].Labels() == corpus[i].Labels());
}

TEST_CASE("walk generator") {
  const KinematicModel h = synth::Humanoid40();
  synth::GaitOptions g;
  g.seed = 4;
  g.single_supports = 4;
  const synth::ScriptedMotion m = synth::GenerateWalk(h, g);
  REQUIRE_FALSE(m.phases.empty());
  CHECK(m.Labels() == std::vector<std::string>{"2Feet", "1Foot", "2Feet", "1Foot", "2Feet", "1Foot", "2Feet", "1Foot",
                                               "2Feet"});
  long total = 0;
  for (std::size_t i = 0; i < m.phases.size(); ++i) {
    const synth::TruthPhase& p = m.phases[i];
    CHECK(p.start == total);
    total += p.duration;
    if (i == 0 || i + 1 == m.phases.size()) continue;
    if (p.pose.feet == 1) {
      CHECK(p.duration >= 38);
      CHECK(p.duration <= 52);
    } else {
      CHECK(p.duration >= 11);
      CHECK(p.duration <= 19);
    }
  }
  CHECK(total == static_cast<long>(m.poses.size()));
  for (const PoseVector& p : m.poses) CHECK(h.WithinLimits(p));

  const synth::ScriptedMotion same = synth::GenerateWalk(h, g);
  for (std::size_t t = 0; t < m.poses.size(); t += 17) CHECK(same.poses[t].Flat() == m.poses[t].Flat());

  const MarkerSequence markers = synth::SynthesizeMarkers(h, m.poses, 5);
  CHECK(markers.frame_count() == m.poses.size());
  CHECK(markers.frames[0].frame == 5);
  CHECK(markers.marker_names.size() == 56);
  const std::vector<Vec3> v = VirtualMarkerPositions(h, m.poses[40]);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(*markers.frames[40].positions[i] == v[i]);
}

TEST_CASE("walk with a hand on the wall") {
  const KinematicModel h = synth::Humanoid40();
  synth::GaitOptions g;
  g.seed = 5;
  g.speed_mm_per_frame = 0;
  g.left_hand_contacts = {{120, 260}};
  const synth::ScriptedMotion m = synth::GenerateWalk(h, g);
  bool hand = false;
  for (const auto& p : m.phases) hand |= p.pose.hands == 1;
  CHECK(hand);
  bool listed = false;
  for (const auto& c : m.contacts) listed |= c.segment == "LeftHand" && c.on == 120 && c.off == 260;
  CHECK(listed);

  const std::filesystem::path dir = testing::ScratchDir("synth_bundle");
  synth::BundleSpec spec;
  spec.id = "wall_01";
  spec.category = "loco-manipulation";
  spec.wall = true;
  spec.moving_box = true;
  const std::filesystem::path manifest = synth::WriteBundle(dir, spec, h, m, g.wall_y_mm);
  const MotionBundle b = LoadMotionBundle(manifest);
  CHECK(b.id == "wall_01");
  CHECK(b.frame_count() == m.poses.size());
  REQUIRE(b.annotation.has_value());
  CHECK(*b.annotation == m.Labels());
  const std::vector<ObjectTrack> tracks = BundleObjectTracks(b);
  const std::vector<EnvironmentElement> elements = BundleElements(b, tracks);
  std::size_t environmental = 0;
  for (const EnvironmentElement& e : elements) environmental += ClassifyEnvironmental(e.poses, {});
  CHECK(elements.size() == 3);
  CHECK(environmental == 2);
}
