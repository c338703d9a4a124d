#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "supportseg/analytics.hpp"
#include "supportseg/contact_detection.hpp"
#include "supportseg/geometry.hpp"
#include "supportseg/kinematic_model.hpp"
#include "supportseg/marker_fit.hpp"
#include "supportseg/pose_segmentation.hpp"

namespace supportseg {

std::string ReadTextFile(const std::filesystem::path& path);
// Writes atomically enough for our purposes: parent directories are created.
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

// Shortest decimal form that parses back to the same double.
std::string FormatNumber(double value);

// ---- meshes ---------------------------------------------------------------

// ASCII OBJ subset: `v x y z` and `f i j k ...` (polygons are fan-triangulated,
// `i/t/n` forms and negative indices accepted). Other records are ignored.
TriangleMesh ParseObj(std::istream& in, const std::string& file = {});
TriangleMesh LoadObj(const std::filesystem::path& path);
std::string EmitObj(const TriangleMesh& mesh);

// ---- model spec -----------------------------------------------------------

// `base_dir` resolves mesh file references.
KinematicModel ParseModelSpec(const std::string& text, const std::filesystem::path& base_dir,
                              const std::string& file = {});
KinematicModel LoadModelSpec(const std::filesystem::path& path);
// Meshes are written inline so the document is self-contained.
std::string EmitModelSpec(const KinematicModel& model);

// ---- marker sequences -----------------------------------------------------

// Header `frame,marker_name,x,y,z`. Rows with empty x,y,z mark an occluded
// marker; markers absent from a frame are occluded too. Frames must increase.
// With `declared` set, marker order follows it and other names are rejected;
// otherwise order of first appearance is used.
MarkerSequence ParseMarkerCsv(std::istream& in, const std::string& file = {},
                              const std::vector<std::string>* declared = nullptr);
std::string EmitMarkerCsv(const MarkerSequence& sequence);

// {"markers": [names], "frames": [{"frame": n, "positions": [[x,y,z] | null, ...]}]}
MarkerSequence ParseMarkerJson(const std::string& text, const std::string& file = {});
std::string EmitMarkerJson(const MarkerSequence& sequence);

// Dispatches on extension (.csv or .json).
MarkerSequence LoadMarkers(const std::filesystem::path& path);

// Reorders columns to `names`; names missing from the sequence become occluded.
// Throws ParseError naming `file` for markers not in `names`.
MarkerSequence SelectMarkers(const MarkerSequence& sequence, const std::vector<std::string>& names,
                             const std::string& file = {});

// ---- motion bundles -------------------------------------------------------

struct BundleObject {
  std::string name;
  TriangleMesh mesh;
  std::string markers_file;              // empty: static object
  std::optional<MarkerSequence> markers;
  ObjectModel model;                     // marker offsets for pose fitting
  RigidPose static_pose;                 // used when there are no markers
};

struct MotionBundle {
  std::string id;
  std::string category;
  std::string description;
  double fps = kFramesPerSecond;
  std::string subject_file;
  MarkerSequence subject;
  std::vector<BundleObject> objects;
  std::optional<std::vector<std::string>> annotation;  // pose labels

  std::size_t frame_count() const { return subject.frame_count(); }
};

// Manifest fields: id, category, description?, fps?, subject_markers,
// objects[] {name, mesh, markers?, marker_offsets?, pose?}, annotation?.
// Paths are relative to the manifest.
MotionBundle LoadMotionBundle(const std::filesystem::path& manifest);

// Object tracks for every bundle object: fitted from markers or constant.
std::vector<ObjectTrack> BundleObjectTracks(const MotionBundle& bundle);
std::vector<EnvironmentElement> BundleElements(const MotionBundle& bundle, const std::vector<ObjectTrack>& tracks);

// ---- pipeline stage documents ---------------------------------------------

struct TrajectoryDocument {
  std::string motion_id;
  std::string category;
  PoseTrajectory subject;
  std::vector<ObjectTrack> objects;
};

std::string EmitTrajectory(const TrajectoryDocument& doc, const KinematicModel& model);
TrajectoryDocument ParseTrajectory(const std::string& text, const KinematicModel& model, const std::string& file = {});

struct TimelineDocument {
  std::string motion_id;
  std::string category;
  ContactTimeline timeline;
};

std::string EmitTimeline(const TimelineDocument& doc);
TimelineDocument ParseTimeline(const std::string& text, const std::string& file = {});

std::string EmitSequence(const TransitionSequence& sequence);
TransitionSequence ParseSequence(const std::string& text, const std::string& file = {});

// One row per record: start,end,label,duration with `end` exclusive.
std::string EmitSequenceCsv(const TransitionSequence& sequence);

// Pose labels from a JSON list, a sequence document or a manifest annotation.
std::vector<std::string> ParsePoseLabels(const std::string& text, const std::string& file = {});

// ---- analytic exports -----------------------------------------------------

// Matrix form: rows are origin poses, columns destination poses, cells
// `appearance/time` with two decimals, `--` for empty cells, plus a total column.
std::string EmitTableCsv(const TransitionStats& stats);
// Long form: from,to,count,frames,appearance_pct,time_pct.
std::string EmitTableCellsCsv(const TransitionStats& stats);
// bin_start,bin_end,count,category; histograms are concatenated in order.
std::string EmitHistogramCsv(const std::vector<Histogram>& histograms);

struct NamedMixture {
  TransitionKey transition;
  std::size_t samples = 0;
  std::optional<MixtureFit> fit;
  std::string skipped;  // reason when fit is empty
};
std::string EmitMixtures(const std::vector<NamedMixture>& mixtures);

std::string EmitGraphDot(const TransitionGraph& graph);
std::string EmitGraphJson(const TransitionGraph& graph);

std::string EmitEvalReport(const EvalReport& report, const std::string& motion_id = {});

}  // namespace supportseg
