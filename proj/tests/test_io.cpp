#include <doctest.h>

#include <random>
#include <sstream>

#include "helpers.hpp"
#include "supportseg/io.hpp"
#include "supportseg/synth.hpp"

using namespace supportseg;

namespace {

struct Caught {
  std::string file;
  std::size_t line = 0;
  std::string field;
  std::string message;
};

template <typename F>
Caught CatchParse(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return {e.file(), e.line(), e.field(), e.what()};
  }
  FAIL("no ParseError thrown");
  return {};
}

MarkerSequence Csv(const std::string& text, const std::vector<std::string>* declared = nullptr) {
  std::istringstream in(text);
  return ParseMarkerCsv(in, "m.csv", declared);
}

Caught CsvError(const std::string& text, const std::vector<std::string>* declared = nullptr) {
  return CatchParse([&] { Csv(text, declared); });
}

const std::string kSmallCsv =
    "frame,marker_name,x,y,z\n"
    "0,A,1,2,3\n"
    "0,B,4,5,6\n"
    "1,A,1.5,2,3\n"
    "1,B,,,\n";

}  // namespace

TEST_CASE("marker csv parsing") {
  const MarkerSequence s = Csv(kSmallCsv);
  CHECK(s.marker_names == std::vector<std::string>{"A", "B"});
  REQUIRE(s.frame_count() == 2);
  CHECK(*s.frames[0].positions[1] == Vec3(4, 5, 6));
  CHECK(s.frames[1].positions[0]->x() == 1.5);
  CHECK_FALSE(s.frames[1].positions[1].has_value());
  CHECK(s.frames[1].observed_count() == 1);
}

TEST_CASE("markers absent from a frame are missing and declared order is kept") {
  const std::vector<std::string> declared = {"B", "A", "C"};
  const MarkerSequence s = Csv("frame,marker_name,x,y,z\n3,A,1,1,1\n5,B,2,2,2\n", &declared);
  CHECK(s.marker_names == declared);
  CHECK(s.frames[0].frame == 3);
  CHECK(s.frames[0].positions[1].has_value());
  CHECK_FALSE(s.frames[0].positions[0].has_value());
  CHECK_FALSE(s.frames[0].positions[2].has_value());
  CHECK(s.frames[1].positions[0].has_value());
}

TEST_CASE("marker csv round trip is a fixed point") {
  const std::string text = "frame,marker_name,x,y,z\n 0 , A ,1.0,2e0,-0\n0,B,,,\n1,A,0.1,0.2,0.30000000000000004\n";
  const std::string once = EmitMarkerCsv(Csv(text));
  CHECK(once == "frame,marker_name,x,y,z\n0,A,1,2,0\n0,B,,,\n1,A,0.1,0.2,0.30000000000000004\n1,B,,,\n");
  CHECK(EmitMarkerCsv(Csv(once)) == once);

  std::mt19937_64 rng(4);
  const KinematicModel six = synth::SixDofFixture();
  std::vector<PoseVector> poses;
  for (int t = 0; t < 10; ++t) poses.push_back(testing::RandomPose(six, rng));
  MarkerSequence seq = synth::SynthesizeMarkers(six, poses, 100);
  seq.frames[3].positions[2].reset();
  const std::string emitted = EmitMarkerCsv(seq);
  const MarkerSequence back = Csv(emitted);
  CHECK(EmitMarkerCsv(back) == emitted);
  for (std::size_t t = 0; t < seq.frames.size(); ++t) CHECK(back.frames[t].positions == seq.frames[t].positions);
  const MarkerSequence json = ParseMarkerJson(EmitMarkerJson(seq));
  CHECK(EmitMarkerJson(json) == EmitMarkerJson(seq));
  CHECK(EmitMarkerCsv(json) == emitted);
}

TEST_CASE("marker csv errors name file, line and field") {
  Caught c = CsvError("");
  CHECK(c.file == "m.csv");
  CHECK(c.field == "header");
  c = CsvError("frame,name,x,y,z\n");
  CHECK(c.line == 1);
  CHECK(c.field == "header");
  c = CsvError("frame,marker_name,x,y,z\n2,A,1,2,3\n1,A,1,2,3\n");
  CHECK(c.line == 3);
  CHECK(c.field == "frame");
  c = CsvError("frame,marker_name,x,y,z\n\n0,A,1,zz,3\n");
  CHECK(c.line == 3);
  CHECK(c.field == "y");
  CHECK(c.message == "m.csv:3: field 'y': malformed number 'zz'");
  c = CsvError("frame,marker_name,x,y,z\n0,A,1,,3\n");
  CHECK(c.field == "y");
  c = CsvError("frame,marker_name,x,y,z\nzero,A,1,2,3\n");
  CHECK(c.field == "frame");
  c = CsvError("frame,marker_name,x,y,z\n0,A,1,2\n");
  CHECK(c.line == 2);
  c = CsvError("frame,marker_name,x,y,z\n0,,1,2,3\n");
  CHECK(c.field == "marker_name");
  c = CsvError("frame,marker_name,x,y,z\n0,A,1,2,3\n0,A,1,2,3\n");
  CHECK(c.field == "marker_name");
  CHECK(c.line == 3);
  const std::vector<std::string> declared = {"A"};
  c = CsvError("frame,marker_name,x,y,z\n0,A,1,2,3\n0,Q,1,2,3\n", &declared);
  CHECK(c.field == "marker_name");
  CHECK(c.line == 3);
  CHECK(c.message.find("'Q'") != std::string::npos);
  c = CsvError("frame,marker_name,x,y,z\n0,A,1,2,inf\n");
  CHECK(c.field == "z");
}

TEST_CASE("marker json errors") {
  CHECK(CatchParse([] { ParseMarkerJson("{\"markers\": [\"A\"],\n \"frames\": [}", "m.json"); }).line == 2);
  const Caught c = CatchParse([] {
    ParseMarkerJson(R"({"markers": ["A"], "frames": [{"frame": 0, "positions": [[1, 2]]}]})", "m.json");
  });
  CHECK(c.field == "frames[0].positions[0]");
  CHECK(CatchParse([] {
          ParseMarkerJson(R"({"markers": ["A"], "frames": [{"frame": 1, "positions": [null]},
                                                           {"frame": 1, "positions": [null]}]})");
        }).field == "frames[1].frame");
  CHECK(CatchParse([] { ParseMarkerJson(R"({"markers": ["A", "A"], "frames": []})"); }).field == "markers[1]");
}

TEST_CASE("select markers") {
  const MarkerSequence s = SelectMarkers(Csv(kSmallCsv), {"B", "Z", "A"});
  CHECK(s.marker_names == std::vector<std::string>{"B", "Z", "A"});
  CHECK(*s.frames[0].positions[0] == Vec3(4, 5, 6));
  CHECK_FALSE(s.frames[0].positions[1].has_value());
  CHECK(CatchParse([&] { SelectMarkers(Csv(kSmallCsv), {"A"}, "s.csv"); }).file == "s.csv");
}

TEST_CASE("obj parsing") {
  const TriangleMesh m = LoadObj(testing::SourcePath("tests/data/table_bundle/table.obj"));
  CHECK(m.vertices().size() == 8);
  CHECK(m.triangles().size() == 12);
  CHECK(m.IsClosed());
  std::istringstream neg("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\nvn 0 0 1\nusemtl x\n");
  const TriangleMesh tri = ParseObj(neg);
  REQUIRE(tri.triangles().size() == 1);
  CHECK(tri.triangles()[0] == TriangleIndices{0, 1, 2});
  CHECK(ParseObj(*std::make_unique<std::istringstream>(EmitObj(m))).triangles() == m.triangles());

  std::istringstream bad_v("v 1 2\n");
  CHECK(CatchParse([&] { ParseObj(bad_v, "x.obj"); }).field == "v");
  std::istringstream bad_f("v 0 0 0\nv 1 0 0\n\nf 1 2 3\n");
  const Caught c = CatchParse([&] { ParseObj(bad_f, "x.obj"); });
  CHECK(c.line == 4);
  CHECK(c.field == "f");
  std::istringstream short_f("v 0 0 0\nv 1 0 0\nf 1 2\n");
  CHECK(CatchParse([&] { ParseObj(short_f, "x.obj"); }).line == 3);
  CHECK(CatchParse([] { LoadObj("/nonexistent/mesh.obj"); }).file == "/nonexistent/mesh.obj");
}

TEST_CASE("model spec documents") {
  const KinematicModel six = synth::SixDofFixture();
  const std::string text = EmitModelSpec(six);
  const KinematicModel back = ParseModelSpec(text, ".");
  CHECK(EmitModelSpec(back) == text);
  CHECK(back.dof() == six.dof());

  const std::string planar = EmitModelSpec(testing::PlanarChain());
  CHECK(ParseModelSpec(planar, ".").joint_count() == 2);
  CHECK(ParseModelSpec(planar, ".").SupportSegments().size() == 1);

  SUBCASE("marker on an unknown segment") {
    std::string t = planar;
    t.replace(t.find("\"segment\": \"Base\""), 17, "\"segment\": \"Nope\"");
    const Caught c = CatchParse([&] { ParseModelSpec(t, ".", "spec.json"); });
    CHECK(c.file == "spec.json");
    CHECK(c.message.find("Nope") != std::string::npos);
  }
  SUBCASE("bad joint type") {
    std::string t = planar;
    t.replace(t.find("\"fixed\""), 7, "\"prismatic\"");
    CHECK(CatchParse([&] { ParseModelSpec(t, ".", "spec.json"); }).field == "joints[2].type");
  }
  SUBCASE("missing limits") {
    const std::string t = R"({"segments": [{"name": "A"}, {"name": "B"}],
                              "joints": [{"name": "J", "parent": "A", "child": "B", "axis": [0, 0, 1]}]})";
    CHECK(CatchParse([&] { ParseModelSpec(t, "."); }).field == "joints[0].limits");
  }
  SUBCASE("missing mesh file") {
    const std::string t = R"({"segments": [{"name": "A", "mesh": "missing.obj"}]})";
    CHECK(CatchParse([&] { ParseModelSpec(t, "/tmp"); }).field == "segments[0].mesh");
  }
  SUBCASE("malformed document") {
    const Caught c = CatchParse([] { ParseModelSpec("{\n\"segments\": [\n,]}", ".", "spec.json"); });
    CHECK(c.line == 3);
  }
}

TEST_CASE("handcrafted loco-manipulation bundle") {
  const MotionBundle b = LoadMotionBundle(testing::SourcePath("tests/data/table_bundle/manifest.json"));
  CHECK(b.id == "table_push_01");
  CHECK(b.category == "loco-manipulation");
  CHECK(b.fps == 100.0);
  CHECK(b.frame_count() == 3);
  CHECK_FALSE(b.subject.frames[1].positions[1].has_value());
  REQUIRE(b.objects.size() == 2);
  CHECK(b.objects[0].name == "floor");
  CHECK(b.objects[0].markers_file.empty());
  CHECK(b.objects[1].model.marker_names == std::vector<std::string>{"TBL1", "TBL2", "TBL3"});
  REQUIRE(b.annotation.has_value());
  CHECK(*b.annotation == std::vector<std::string>{"2Feet", "2Feet-1Hand", "2Feet"});

  const std::vector<ObjectTrack> tracks = BundleObjectTracks(b);
  REQUIRE(tracks.size() == 2);
  const std::vector<EnvironmentElement> elements = BundleElements(b, tracks);
  CHECK(elements[1].poses.size() == 3);
  CHECK((elements[1].poses[2].translation() - Vec3(500, 0, 700)).norm() < 1e-9);
  CHECK(elements[1].poses[0].linear().isIdentity(1e-9));
  CHECK(ClassifyEnvironmental(elements[1].poses, {}));
  CHECK(ParsePoseLabels(ReadTextFile(testing::SourcePath("tests/data/table_bundle/manifest.json"))) == *b.annotation);
}

TEST_CASE("frame count mismatch names both files") {
  const Caught c =
      CatchParse([] { LoadMotionBundle(testing::SourcePath("tests/data/short_object/manifest.json")); });
  CHECK(c.field == "objects[1].markers");
  CHECK(c.message.find("short_object/table.csv' has 2 frames") != std::string::npos);
  CHECK(c.message.find("short_object/subject.csv' has 3") != std::string::npos);
}

TEST_CASE("bundle manifest errors") {
  const std::filesystem::path dir = testing::ScratchDir("io_bundle");
  const std::filesystem::path src = testing::SourcePath("tests/data/table_bundle");
  for (const char* f : {"subject.csv", "table.csv", "table.obj"}) std::filesystem::copy_file(src / f, dir / f);
  const std::string good = ReadTextFile(src / "manifest.json");
  const auto with = [&](const std::string& from, const std::string& to) {
    std::string t = good;
    REQUIRE(t.find(from) != std::string::npos);
    t.replace(t.find(from), from.size(), to);
    WriteTextFile(dir / "manifest.json", t);
    return CatchParse([&] { LoadMotionBundle(dir / "manifest.json"); });
  };
  CHECK(with("\"subject.csv\"", "\"gone.csv\"").field == "subject_markers");
  CHECK(with("\"table.obj\"", "\"gone.obj\"").field == "objects[1].mesh");
  CHECK(with("\"table.csv\"", "\"gone.csv\"").field == "objects[1].markers");
  CHECK(with("\"category\": \"loco-manipulation\",", "").field == "category");
  CHECK(with("\"1Hand-2Feet\"", "\"1Wing\"").field == "annotation[1]");
  CHECK(with("\"name\": \"table\"", "\"name\": \"floor\"").field == "objects[1].name");
  CHECK(with("\"id\": \"table_push_01\"", "\"id\": \"\"").field == "id");
  CHECK(with("\"id\": \"table_push_01\",", "\"id\": \"x\", \"fps\": 0,").field == "fps");
  CHECK(with("{\"side\": 10000}", "{\"side\": -1}").field == "objects[0].mesh.quad.side");
  const Caught c = with("\"TBL3\": [0, 300, 0]", "\"TBL3\": [0, 300]");
  CHECK(c.field == "objects[1].marker_offsets.TBL3");
  CHECK(c.file == (dir / "manifest.json").string());
  CHECK(c.line == 0);
}

TEST_CASE("stage documents round trip") {
  std::mt19937_64 rng(9);
  const KinematicModel six = synth::SixDofFixture();

  TrajectoryDocument traj;
  traj.motion_id = "m1";
  traj.category = "balancing";
  for (int t = 0; t < 5; ++t) {
    FitResult r;
    r.pose = testing::RandomPose(six, rng);
    r.objective = 0.1 * t;
    r.iterations = 100 + t;
    r.converged = t % 2 == 0;
    traj.subject.frames.push_back(10 + t);
    traj.subject.fits.push_back(r);
  }
  ObjectTrack track{"box", {10, 11}, {RigidPose{{1, 2, 3}, {0.1, 0.2, 0.3}}, RigidPose{}}, 4};
  traj.objects.push_back(track);
  const std::string tj = EmitTrajectory(traj, six);
  const TrajectoryDocument tback = ParseTrajectory(tj, six);
  CHECK(EmitTrajectory(tback, six) == tj);
  CHECK(tback.subject.fits[3].pose.Flat() == traj.subject.fits[3].pose.Flat());
  CHECK(tback.objects[0].marker_count == 4);
  CHECK(CatchParse([&] { ParseTrajectory(tj, testing::PlanarChain(), "t.json"); }).field == "layout");

  TimelineDocument tl;
  tl.motion_id = "m1";
  tl.category = "balancing";
  tl.timeline.frames = {0, 1, 2};
  tl.timeline.contacts = {{}, {{"LeftFoot", "floor"}, {"RightFoot", "floor"}}, {{"LeftHand", "wall"}}};
  const std::string lj = EmitTimeline(tl);
  const TimelineDocument lback = ParseTimeline(lj);
  CHECK(EmitTimeline(lback) == lj);
  CHECK(lback.timeline.contacts == tl.timeline.contacts);

  TransitionSequence seq;
  seq.motion_id = "m1";
  seq.category = "balancing";
  TransitionRecord a, b;
  a.from = SupportPose::FromLabel("2Feet");
  a.to = SupportPose::FromLabel("1Foot-1Hand");
  a.duration_frames = 12;
  a.start_frame = 4;
  a.boundary = true;
  b.from = *a.to;
  b.duration_frames = 30;
  b.start_frame = 16;
  b.boundary = true;
  seq.records = {a, b};
  const std::string sj = EmitSequence(seq);
  const TransitionSequence sback = ParseSequence(sj);
  CHECK(EmitSequence(sback) == sj);
  CHECK(sback.records[1].motion_id == "m1");
  CHECK(EmitSequenceCsv(seq) == "start,end,label,duration\n4,16,2Feet,12\n16,46,1Foot-1Hand,30\n");
  CHECK(ParsePoseLabels(sj) == std::vector<std::string>{"2Feet", "1Foot-1Hand"});
  CHECK(ParsePoseLabels(R"(["1Hand-1Foot", "None"])") == std::vector<std::string>{"1Foot-1Hand", "None"});

  std::string broken = sj;
  broken.replace(broken.find("\"1Foot-1Hand\""), 13, "\"1Foot-9Hand\"");
  CHECK(CatchParse([&] { ParseSequence(broken, "s.json"); }).field == "records[0]");
  CHECK(CatchParse([] { ParseTimeline(R"({"motion_id": "x", "category": "y", "frames": [{"frame": 0}]})"); }).field ==
        "frames[0].contacts");
}

TEST_CASE("analytic exports") {
  TransitionStats s;
  s.cells[{"1Foot", "2Feet"}] = {3, 30, 75.0, 2.0 / 3.0 * 100};
  s.cells[{"2Feet", "1Foot-1Hand"}] = {1, 15, 25.0, 100.0 / 3.0};
  s.pose_totals["1Foot"] = s.cells[{"1Foot", "2Feet"}];
  s.pose_totals["2Feet"] = s.cells[{"2Feet", "1Foot-1Hand"}];
  s.n_transitions = 4;
  s.total_frames = 45;
  CHECK(EmitTableCsv(s) ==
        "from,1Foot,2Feet,1Foot-1Hand,total\n"
        "1Foot,--,75.00/66.67,--,75.00/66.67\n"
        "2Feet,--,--,25.00/33.33,25.00/33.33\n");
  CHECK(EmitTableCellsCsv(s) ==
        "from,to,count,frames,appearance_pct,time_pct\n"
        "1Foot,2Feet,3,30,75.00,66.67\n"
        "2Feet,1Foot-1Hand,1,15,25.00,33.33\n");
  const Histogram h = DurationHistogram(std::vector<long>{5, 12, 19, 55}, 10, "locomotion");
  CHECK(EmitHistogramCsv({h}) ==
        "bin_start,bin_end,count,category\n0,10,1,locomotion\n10,20,2,locomotion\n50,60,1,locomotion\n");

  TransitionGraph g;
  g.nodes = {"1Foot", "2Feet", "1Foot-1Hand"};
  g.edges = {{"2Feet", "1Foot", 3, ChangeClass::kSingle}, {"2Feet", "1Foot-1Hand", 1, ChangeClass::kMulti}};
  CHECK(EmitGraphDot(g) ==
        "digraph transitions {\n  node [shape=box];\n  \"1Foot\";\n  \"1Foot-1Hand\";\n  \"2Feet\";\n"
        "  \"2Feet\" -> \"1Foot\" [label=\"3\"];\n"
        "  \"2Feet\" -> \"1Foot-1Hand\" [label=\"1\", color=red, fontcolor=red];\n}\n");
  const std::string gj = EmitGraphJson(g);
  CHECK(gj.find("\"total_count\": 4") != std::string::npos);
  CHECK(gj.find("\"change\": \"multi\"") != std::string::npos);

  const std::string report = EmitEvalReport(CompareToAnnotation(std::vector<std::string>{"2Feet"}, std::vector<std::string>{"2Feet", "1Foot"}), "m9");
  CHECK(report.find("\"n_missed\": 1") != std::string::npos);
  CHECK(report.find("\"motion_id\": \"m9\"") != std::string::npos);
}

TEST_CASE("number formatting") {
  CHECK(FormatNumber(0.0) == "0");
  CHECK(FormatNumber(-0.0) == "0");
  CHECK(FormatNumber(0.1) == "0.1");
  CHECK(FormatNumber(1e21) == "1e+21");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  for (int k = 0; k < 1000; ++k) {
    const double v = u(rng);
    CHECK(std::stod(FormatNumber(v)) == v);
  }
}
