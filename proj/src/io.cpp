#include "supportseg/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace supportseg {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string ReadTextFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "", "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string FormatNumber(double value) {
  if (value == 0.0) return "0";  // also folds -0
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

namespace {

std::string Fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string Dump(const Json& j) { return j.dump(2) + "\n"; }

// Field-path aware accessors for structured documents.
class Doc {
 public:
  explicit Doc(std::string file) : file_(std::move(file)) {}

  const std::string& file() const { return file_; }

  [[noreturn]] void Fail(const std::string& field, const std::string& what) const {
    throw ParseError(file_, 0, field, what);
  }

  Json Parse(const std::string& text) const {
    try {
      return Json::parse(text);
    } catch (const Json::parse_error& e) {
      const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
      const std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + upto, '\n'));
      throw ParseError(file_, line, "", "malformed document");
    }
  }

  const Json& Get(const Json& obj, const std::string& path, const char* key) const {
    if (!obj.is_object()) Fail(path, "expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) Fail(Join(path, key), "required field is missing");
    return *it;
  }

  const Json* Find(const Json& obj, const char* key) const {
    const auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
  }

  double Number(const Json& v, const std::string& path) const {
    if (!v.is_number()) Fail(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) Fail(path, "number is not finite");
    return d;
  }

  long Integer(const Json& v, const std::string& path) const {
    if (!v.is_number_integer()) Fail(path, "expected an integer");
    return v.get<long>();
  }

  bool Bool(const Json& v, const std::string& path) const {
    if (!v.is_boolean()) Fail(path, "expected true or false");
    return v.get<bool>();
  }

  std::string String(const Json& v, const std::string& path) const {
    if (!v.is_string()) Fail(path, "expected a string");
    return v.get<std::string>();
  }

  const Json& Array(const Json& v, const std::string& path) const {
    if (!v.is_array()) Fail(path, "expected an array");
    return v;
  }

  Vec3 Vector(const Json& v, const std::string& path) const {
    if (!v.is_array() || v.size() != 3) Fail(path, "expected an array of 3 numbers");
    return {Number(v[0], Index(path, 0)), Number(v[1], Index(path, 1)), Number(v[2], Index(path, 2))};
  }

  static std::string Join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
  static std::string Index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

 private:
  std::string file_;
};

// JSON numbers are written by the library in shortest round-trip form; -0 is
// folded so emitted documents are stable under re-parsing.
double Clean(double v) { return v == 0.0 ? 0.0 : v; }

Json CleanVec(const Vec3& v) { return Json::array({Clean(v.x()), Clean(v.y()), Clean(v.z())}); }

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> SplitCsv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(Trim(line.substr(start)));
      return out;
    }
    out.push_back(Trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

std::optional<double> ParseDouble(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long> ParseLong(std::string_view s) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// ---- mesh references ----

TriangleMesh MeshFromJson(const Doc& doc, const Json& v, const std::string& path, const fs::path& base_dir) {
  if (v.is_string()) {
    const fs::path mesh_path = base_dir / v.get<std::string>();
    if (!fs::exists(mesh_path)) doc.Fail(path, "mesh file '" + mesh_path.string() + "' does not exist");
    return LoadObj(mesh_path);
  }
  if (!v.is_object()) doc.Fail(path, "expected a mesh file name or mesh object");
  try {
    if (const Json* box = doc.Find(v, "box")) {
      const std::string p = Doc::Join(path, "box");
      return TriangleMesh::Box(doc.Vector(doc.Get(*box, p, "min"), Doc::Join(p, "min")),
                               doc.Vector(doc.Get(*box, p, "max"), Doc::Join(p, "max")));
    }
    if (const Json* quad = doc.Find(v, "quad")) {
      const std::string p = Doc::Join(path, "quad");
      const double side = doc.Number(doc.Get(*quad, p, "side"), Doc::Join(p, "side"));
      if (!(side > 0.0)) doc.Fail(Doc::Join(p, "side"), "must be positive");
      const Json* z = doc.Find(*quad, "z");
      return TriangleMesh::Quad(side, z ? doc.Number(*z, Doc::Join(p, "z")) : 0.0);
    }
    const Json& verts = doc.Array(doc.Get(v, path, "vertices"), Doc::Join(path, "vertices"));
    const Json& tris = doc.Array(doc.Get(v, path, "triangles"), Doc::Join(path, "triangles"));
    std::vector<Vec3> vertices;
    for (std::size_t i = 0; i < verts.size(); ++i)
      vertices.push_back(doc.Vector(verts[i], Doc::Index(Doc::Join(path, "vertices"), i)));
    std::vector<TriangleIndices> triangles;
    for (std::size_t i = 0; i < tris.size(); ++i) {
      const std::string p = Doc::Index(Doc::Join(path, "triangles"), i);
      if (!tris[i].is_array() || tris[i].size() != 3) doc.Fail(p, "expected 3 vertex indices");
      triangles.push_back({static_cast<int>(doc.Integer(tris[i][0], p)), static_cast<int>(doc.Integer(tris[i][1], p)),
                           static_cast<int>(doc.Integer(tris[i][2], p))});
    }
    return TriangleMesh(std::move(vertices), std::move(triangles));
  } catch (const ParseError&) {
    throw;
  } catch (const ValidationError& e) {
    doc.Fail(path, e.what());
  }
}

Json MeshToJson(const TriangleMesh& mesh) {
  Json verts = Json::array();
  for (const Vec3& v : mesh.vertices()) verts.push_back(CleanVec(v));
  Json tris = Json::array();
  for (const TriangleIndices& t : mesh.triangles()) tris.push_back(Json::array({t[0], t[1], t[2]}));
  return Json{{"vertices", verts}, {"triangles", tris}};
}

}  // namespace

// ---- OBJ ----

TriangleMesh ParseObj(std::istream& in, const std::string& file) {
  std::vector<Vec3> vertices;
  std::vector<TriangleIndices> triangles;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      std::string tok[3];
      if (!(ls >> tok[0] >> tok[1] >> tok[2])) throw ParseError(file, line_no, "v", "expected 3 coordinates");
      Vec3 p;
      for (int k = 0; k < 3; ++k) {
        const auto d = ParseDouble(tok[k]);
        if (!d) throw ParseError(file, line_no, "v", "malformed coordinate '" + tok[k] + "'");
        p[k] = *d;
      }
      vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const auto slash = tok.find('/');
        const auto raw = ParseLong(std::string_view(tok).substr(0, slash));
        if (!raw || *raw == 0) throw ParseError(file, line_no, "f", "malformed vertex index '" + tok + "'");
        const long n = static_cast<long>(vertices.size());
        const long i = *raw > 0 ? *raw - 1 : n + *raw;
        if (i < 0 || i >= n) throw ParseError(file, line_no, "f", "vertex index " + tok + " out of range");
        idx.push_back(static_cast<int>(i));
      }
      if (idx.size() < 3) throw ParseError(file, line_no, "f", "face needs at least 3 vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) triangles.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  return TriangleMesh(std::move(vertices), std::move(triangles));
}

TriangleMesh LoadObj(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "", "cannot open file");
  return ParseObj(in, path.string());
}

std::string EmitObj(const TriangleMesh& mesh) {
  std::string out;
  for (const Vec3& v : mesh.vertices())
    out += "v " + FormatNumber(v.x()) + " " + FormatNumber(v.y()) + " " + FormatNumber(v.z()) + "\n";
  for (const TriangleIndices& t : mesh.triangles())
    out += "f " + std::to_string(t[0] + 1) + " " + std::to_string(t[1] + 1) + " " + std::to_string(t[2] + 1) + "\n";
  return out;
}

// ---- model spec ----

KinematicModel ParseModelSpec(const std::string& text, const fs::path& base_dir, const std::string& file) {
  const Doc doc(file);
  const Json root = doc.Parse(text);
  const std::string name = doc.Find(root, "name") ? doc.String(root["name"], "name") : std::string();

  std::vector<Segment> segments;
  const Json& segs = doc.Array(doc.Get(root, "", "segments"), "segments");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string p = Doc::Index("segments", i);
    Segment s;
    s.name = doc.String(doc.Get(segs[i], p, "name"), Doc::Join(p, "name"));
    if (const Json* m = doc.Find(segs[i], "mesh")) s.mesh = MeshFromJson(doc, *m, Doc::Join(p, "mesh"), base_dir);
    if (const Json* sup = doc.Find(segs[i], "support")) s.support = doc.Bool(*sup, Doc::Join(p, "support"));
    segments.push_back(std::move(s));
  }

  std::vector<Joint> joints;
  if (const Json* js = doc.Find(root, "joints")) {
    doc.Array(*js, "joints");
    for (std::size_t i = 0; i < js->size(); ++i) {
      const Json& j = (*js)[i];
      const std::string p = Doc::Index("joints", i);
      Joint jt;
      jt.name = doc.String(doc.Get(j, p, "name"), Doc::Join(p, "name"));
      jt.parent = doc.String(doc.Get(j, p, "parent"), Doc::Join(p, "parent"));
      jt.child = doc.String(doc.Get(j, p, "child"), Doc::Join(p, "child"));
      const std::string type = doc.Find(j, "type") ? doc.String(j["type"], Doc::Join(p, "type")) : "revolute";
      if (type == "revolute") {
        jt.type = JointType::kRevolute;
      } else if (type == "fixed") {
        jt.type = JointType::kFixed;
      } else {
        doc.Fail(Doc::Join(p, "type"), "expected 'revolute' or 'fixed', got '" + type + "'");
      }
      if (const Json* off = doc.Find(j, "offset")) jt.offset = doc.Vector(*off, Doc::Join(p, "offset"));
      if (jt.type == JointType::kRevolute) {
        jt.axis = doc.Vector(doc.Get(j, p, "axis"), Doc::Join(p, "axis"));
        const Json& lim = doc.Get(j, p, "limits");
        const std::string lp = Doc::Join(p, "limits");
        if (!lim.is_array() || lim.size() != 2) doc.Fail(lp, "expected [lower, upper] in radians");
        jt.lower = doc.Number(lim[0], Doc::Index(lp, 0));
        jt.upper = doc.Number(lim[1], Doc::Index(lp, 1));
      }
      joints.push_back(std::move(jt));
    }
  }
  for (Segment& s : segments)
    for (const Joint& j : joints)
      if (j.child == s.name) s.parent_joint = j.name;

  std::vector<MarkerAttachment> markers;
  if (const Json* ms = doc.Find(root, "markers")) {
    doc.Array(*ms, "markers");
    for (std::size_t i = 0; i < ms->size(); ++i) {
      const std::string p = Doc::Index("markers", i);
      const Json& m = (*ms)[i];
      markers.push_back({doc.String(doc.Get(m, p, "name"), Doc::Join(p, "name")),
                         doc.String(doc.Get(m, p, "segment"), Doc::Join(p, "segment")),
                         doc.Vector(doc.Get(m, p, "offset"), Doc::Join(p, "offset"))});
    }
  }

  try {
    return KinematicModel(name, std::move(segments), std::move(joints), std::move(markers));
  } catch (const ValidationError& e) {
    throw ParseError(file, 0, "", e.what());
  }
}

KinematicModel LoadModelSpec(const fs::path& path) {
  return ParseModelSpec(ReadTextFile(path), path.parent_path(), path.string());
}

std::string EmitModelSpec(const KinematicModel& model) {
  Json segs = Json::array();
  for (const Segment& s : model.segments()) {
    Json j{{"name", s.name}};
    if (!s.mesh.empty()) j["mesh"] = MeshToJson(s.mesh);
    if (s.support) j["support"] = true;
    segs.push_back(std::move(j));
  }
  Json joints = Json::array();
  for (const Joint& jt : model.joints()) {
    Json j{{"name", jt.name}, {"parent", jt.parent}, {"child", jt.child}};
    j["type"] = jt.type == JointType::kRevolute ? "revolute" : "fixed";
    j["offset"] = CleanVec(jt.offset);
    if (jt.type == JointType::kRevolute) {
      j["axis"] = CleanVec(jt.axis);
      j["limits"] = Json::array({Clean(jt.lower), Clean(jt.upper)});
    }
    joints.push_back(std::move(j));
  }
  Json markers = Json::array();
  for (const MarkerAttachment& m : model.markers())
    markers.push_back({{"name", m.name}, {"segment", m.segment}, {"offset", CleanVec(m.offset)}});
  return Dump(Json{{"name", model.name()}, {"segments", segs}, {"joints", joints}, {"markers", markers}});
}

// ---- marker sequences ----

MarkerSequence ParseMarkerCsv(std::istream& in, const std::string& file, const std::vector<std::string>* declared) {
  MarkerSequence seq;
  std::unordered_map<std::string, std::size_t> column;
  if (declared) {
    seq.marker_names = *declared;
    for (std::size_t i = 0; i < declared->size(); ++i)
      if (!column.emplace((*declared)[i], i).second)
        throw ValidationError("declared marker '" + (*declared)[i] + "' is listed twice");
  }

  struct Row {
    std::size_t column;
    std::optional<Vec3> position;
  };
  std::vector<std::pair<long, std::vector<Row>>> frames;
  std::set<std::string> seen_in_frame;

  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view trimmed = Trim(line);
    if (trimmed.empty()) continue;
    std::vector<std::string_view> cells = SplitCsv(trimmed);
    if (!header) {
      static const std::vector<std::string_view> expected = {"frame", "marker_name", "x", "y", "z"};
      if (cells != expected) throw ParseError(file, line_no, "header", "expected 'frame,marker_name,x,y,z'");
      header = true;
      continue;
    }
    if (cells.size() != 5)
      throw ParseError(file, line_no, "", "expected 5 fields, found " + std::to_string(cells.size()));
    const auto frame = ParseLong(cells[0]);
    if (!frame) throw ParseError(file, line_no, "frame", "malformed frame number '" + std::string(cells[0]) + "'");
    const std::string name(cells[1]);
    if (name.empty()) throw ParseError(file, line_no, "marker_name", "empty marker name");

    if (frames.empty() || frames.back().first != *frame) {
      if (!frames.empty() && *frame < frames.back().first)
        throw ParseError(file, line_no, "frame",
                         "frame " + std::to_string(*frame) + " follows frame " + std::to_string(frames.back().first));
      frames.push_back({*frame, {}});
      seen_in_frame.clear();
    }
    if (!seen_in_frame.insert(name).second)
      throw ParseError(file, line_no, "marker_name", "marker '" + name + "' repeated within frame");

    auto it = column.find(name);
    if (it == column.end()) {
      if (declared) throw ParseError(file, line_no, "marker_name", "unknown marker '" + name + "'");
      it = column.emplace(name, seq.marker_names.size()).first;
      seq.marker_names.push_back(name);
    }

    const bool all_empty = cells[2].empty() && cells[3].empty() && cells[4].empty();
    std::optional<Vec3> pos;
    if (!all_empty) {
      Vec3 p;
      static const char* axes[] = {"x", "y", "z"};
      for (int k = 0; k < 3; ++k) {
        const auto d = ParseDouble(cells[2 + k]);
        if (!d) throw ParseError(file, line_no, axes[k], "malformed number '" + std::string(cells[2 + k]) + "'");
        p[k] = *d;
      }
      pos = p;
    }
    frames.back().second.push_back({it->second, pos});
  }
  if (!header) throw ParseError(file, line_no == 0 ? 1 : line_no, "header", "missing header");

  for (auto& [frame, rows] : frames) {
    MarkerFrame mf;
    mf.frame = frame;
    mf.positions.assign(seq.marker_names.size(), std::nullopt);
    for (const Row& r : rows) mf.positions[r.column] = r.position;
    seq.frames.push_back(std::move(mf));
  }
  return seq;
}

std::string EmitMarkerCsv(const MarkerSequence& sequence) {
  std::string out = "frame,marker_name,x,y,z\n";
  for (const MarkerFrame& f : sequence.frames) {
    for (std::size_t i = 0; i < sequence.marker_names.size(); ++i) {
      out += std::to_string(f.frame) + "," + sequence.marker_names[i] + ",";
      const auto& p = i < f.positions.size() ? f.positions[i] : std::nullopt;
      if (p) {
        out += FormatNumber(p->x()) + "," + FormatNumber(p->y()) + "," + FormatNumber(p->z());
      } else {
        out += ",,";
      }
      out += "\n";
    }
  }
  return out;
}

MarkerSequence ParseMarkerJson(const std::string& text, const std::string& file) {
  const Doc doc(file);
  const Json root = doc.Parse(text);
  MarkerSequence seq;
  const Json& names = doc.Array(doc.Get(root, "", "markers"), "markers");
  std::set<std::string> unique;
  for (std::size_t i = 0; i < names.size(); ++i) {
    seq.marker_names.push_back(doc.String(names[i], Doc::Index("markers", i)));
    if (!unique.insert(seq.marker_names.back()).second)
      doc.Fail(Doc::Index("markers", i), "duplicate marker '" + seq.marker_names.back() + "'");
  }
  const Json& frames = doc.Array(doc.Get(root, "", "frames"), "frames");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const std::string p = Doc::Index("frames", t);
    MarkerFrame f;
    f.frame = doc.Integer(doc.Get(frames[t], p, "frame"), Doc::Join(p, "frame"));
    if (!seq.frames.empty() && f.frame <= seq.frames.back().frame)
      doc.Fail(Doc::Join(p, "frame"), "frame numbers must increase");
    const std::string pp = Doc::Join(p, "positions");
    const Json& pos = doc.Array(doc.Get(frames[t], p, "positions"), pp);
    if (pos.size() != seq.marker_names.size())
      doc.Fail(pp, "expected " + std::to_string(seq.marker_names.size()) + " entries");
    for (std::size_t i = 0; i < pos.size(); ++i)
      f.positions.push_back(pos[i].is_null() ? std::nullopt : std::optional<Vec3>(doc.Vector(pos[i], Doc::Index(pp, i))));
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

std::string EmitMarkerJson(const MarkerSequence& sequence) {
  Json frames = Json::array();
  for (const MarkerFrame& f : sequence.frames) {
    Json pos = Json::array();
    for (const auto& p : f.positions) pos.push_back(p ? CleanVec(*p) : Json(nullptr));
    frames.push_back({{"frame", f.frame}, {"positions", pos}});
  }
  return Dump(Json{{"markers", sequence.marker_names}, {"frames", frames}});
}

MarkerSequence LoadMarkers(const fs::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".json") return ParseMarkerJson(ReadTextFile(path), path.string());
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "", "cannot open file");
  return ParseMarkerCsv(in, path.string());
}

MarkerSequence SelectMarkers(const MarkerSequence& sequence, const std::vector<std::string>& names,
                             const std::string& file) {
  std::unordered_map<std::string, std::size_t> target;
  for (std::size_t i = 0; i < names.size(); ++i) target.emplace(names[i], i);
  std::vector<std::size_t> dest;
  for (const std::string& n : sequence.marker_names) {
    const auto it = target.find(n);
    if (it == target.end()) throw ParseError(file, 0, "marker_name", "unknown marker '" + n + "'");
    dest.push_back(it->second);
  }
  MarkerSequence out;
  out.marker_names = names;
  for (const MarkerFrame& f : sequence.frames) {
    MarkerFrame g;
    g.frame = f.frame;
    g.positions.assign(names.size(), std::nullopt);
    for (std::size_t i = 0; i < dest.size() && i < f.positions.size(); ++i) g.positions[dest[i]] = f.positions[i];
    out.frames.push_back(std::move(g));
  }
  return out;
}

// ---- bundles ----

MotionBundle LoadMotionBundle(const fs::path& manifest) {
  const std::string file = manifest.string();
  const Doc doc(file);
  const Json root = doc.Parse(ReadTextFile(manifest));
  const fs::path base = manifest.parent_path();

  MotionBundle b;
  b.id = doc.String(doc.Get(root, "", "id"), "id");
  if (b.id.empty()) doc.Fail("id", "must not be empty");
  b.category = doc.String(doc.Get(root, "", "category"), "category");
  if (const Json* d = doc.Find(root, "description")) b.description = doc.String(*d, "description");
  if (const Json* fps = doc.Find(root, "fps")) {
    b.fps = doc.Number(*fps, "fps");
    if (!(b.fps > 0.0)) doc.Fail("fps", "must be positive");
  }

  const std::string subject_rel = doc.String(doc.Get(root, "", "subject_markers"), "subject_markers");
  const fs::path subject_path = base / subject_rel;
  if (!fs::exists(subject_path)) doc.Fail("subject_markers", "file '" + subject_path.string() + "' does not exist");
  b.subject_file = subject_path.string();
  b.subject = LoadMarkers(subject_path);
  if (b.subject.frame_count() == 0) doc.Fail("subject_markers", "'" + b.subject_file + "' contains no frames");

  if (const Json* objs = doc.Find(root, "objects")) {
    doc.Array(*objs, "objects");
    std::set<std::string> names;
    for (std::size_t i = 0; i < objs->size(); ++i) {
      const Json& o = (*objs)[i];
      const std::string p = Doc::Index("objects", i);
      BundleObject obj;
      obj.name = doc.String(doc.Get(o, p, "name"), Doc::Join(p, "name"));
      if (!names.insert(obj.name).second) doc.Fail(Doc::Join(p, "name"), "duplicate object '" + obj.name + "'");
      obj.mesh = MeshFromJson(doc, doc.Get(o, p, "mesh"), Doc::Join(p, "mesh"), base);
      if (obj.mesh.empty()) doc.Fail(Doc::Join(p, "mesh"), "mesh has no triangles");
      obj.model.name = obj.name;
      if (const Json* pose = doc.Find(o, "pose")) {
        const std::string pp = Doc::Join(p, "pose");
        if (!pose->is_array() || pose->size() != 6) doc.Fail(pp, "expected [x, y, z, alpha, beta, gamma]");
        for (int k = 0; k < 3; ++k) obj.static_pose.translation[k] = doc.Number((*pose)[k], Doc::Index(pp, k));
        for (int k = 0; k < 3; ++k) obj.static_pose.rotation[k] = doc.Number((*pose)[3 + k], Doc::Index(pp, 3 + k));
      }
      if (const Json* mk = doc.Find(o, "markers")) {
        const fs::path mpath = base / doc.String(*mk, Doc::Join(p, "markers"));
        if (!fs::exists(mpath)) doc.Fail(Doc::Join(p, "markers"), "file '" + mpath.string() + "' does not exist");
        obj.markers_file = mpath.string();
        obj.markers = LoadMarkers(mpath);
        const std::string op = Doc::Join(p, "marker_offsets");
        const Json& offsets = doc.Get(o, p, "marker_offsets");
        if (!offsets.is_object()) doc.Fail(op, "expected an object of marker name to [x, y, z]");
        for (const auto& [mname, value] : offsets.items()) {
          obj.model.marker_names.push_back(mname);
          obj.model.marker_offsets.push_back(doc.Vector(value, Doc::Join(op, mname)));
        }
        if (obj.markers->frame_count() != b.subject.frame_count())
          doc.Fail(Doc::Join(p, "markers"), "frame count mismatch: '" + obj.markers_file + "' has " +
                                                std::to_string(obj.markers->frame_count()) + " frames, '" +
                                                b.subject_file + "' has " +
                                                std::to_string(b.subject.frame_count()));
        for (std::size_t t = 0; t < obj.markers->frames.size(); ++t)
          if (obj.markers->frames[t].frame != b.subject.frames[t].frame)
            doc.Fail(Doc::Join(p, "markers"), "frame numbers of '" + obj.markers_file + "' and '" + b.subject_file +
                                                  "' differ at row " + std::to_string(t));
      }
      b.objects.push_back(std::move(obj));
    }
  }

  if (const Json* ann = doc.Find(root, "annotation")) {
    doc.Array(*ann, "annotation");
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < ann->size(); ++i) {
      const std::string p = Doc::Index("annotation", i);
      labels.push_back(doc.String((*ann)[i], p));
      try {
        labels.back() = SupportPose::FromLabel(labels.back()).Label();
      } catch (const ValidationError& e) {
        doc.Fail(p, e.what());
      }
    }
    b.annotation = std::move(labels);
  }
  return b;
}

std::vector<ObjectTrack> BundleObjectTracks(const MotionBundle& bundle) {
  std::vector<ObjectTrack> tracks;
  std::vector<long> frames;
  for (const MarkerFrame& f : bundle.subject.frames) frames.push_back(f.frame);
  for (const BundleObject& o : bundle.objects) {
    if (o.markers) {
      try {
        tracks.push_back(FitObjectTrack(o.model, *o.markers));
      } catch (const ValidationError& e) {
        throw ParseError(o.markers_file, 0, "", e.what());
      }
    } else {
      ObjectTrack t;
      t.name = o.name;
      t.frames = frames;
      t.poses.assign(frames.size(), o.static_pose);
      tracks.push_back(std::move(t));
    }
  }
  return tracks;
}

std::vector<EnvironmentElement> BundleElements(const MotionBundle& bundle, const std::vector<ObjectTrack>& tracks) {
  std::vector<EnvironmentElement> out;
  for (const BundleObject& o : bundle.objects) {
    const auto it = std::find_if(tracks.begin(), tracks.end(), [&](const ObjectTrack& t) { return t.name == o.name; });
    if (it == tracks.end()) throw ValidationError("no track for object '" + o.name + "'");
    EnvironmentElement e;
    e.name = o.name;
    e.mesh = o.mesh;
    for (const RigidPose& p : it->poses) e.poses.push_back(p.ToTransform());
    out.push_back(std::move(e));
  }
  return out;
}

// ---- trajectories ----

std::string EmitTrajectory(const TrajectoryDocument& doc, const KinematicModel& model) {
  Json layout = Json::array({"px", "py", "pz", "alpha", "beta", "gamma"});
  for (std::size_t k = 0; k < model.joint_count(); ++k) layout.push_back(model.revolute_joint(k).name);
  Json frames = Json::array();
  for (std::size_t t = 0; t < doc.subject.size(); ++t) {
    const FitResult& fit = doc.subject.fits[t];
    const Eigen::VectorXd x = fit.pose.Flat();
    Json pose = Json::array();
    for (Eigen::Index i = 0; i < x.size(); ++i) pose.push_back(Clean(x[i]));
    frames.push_back({{"frame", doc.subject.frames[t]},
                      {"pose", pose},
                      {"objective", Clean(fit.objective)},
                      {"evaluations", fit.iterations},
                      {"converged", fit.converged}});
  }
  Json objects = Json::array();
  for (const ObjectTrack& o : doc.objects) {
    Json poses = Json::array();
    for (const RigidPose& p : o.poses) {
      poses.push_back(Json::array({Clean(p.translation.x()), Clean(p.translation.y()), Clean(p.translation.z()),
                                   Clean(p.rotation.x()), Clean(p.rotation.y()), Clean(p.rotation.z())}));
    }
    objects.push_back({{"name", o.name}, {"marker_count", o.marker_count}, {"frames", o.frames}, {"poses", poses}});
  }
  return Dump(Json{{"motion_id", doc.motion_id},
                   {"category", doc.category},
                   {"model", model.name()},
                   {"layout", layout},
                   {"frames", frames},
                   {"objects", objects}});
}

TrajectoryDocument ParseTrajectory(const std::string& text, const KinematicModel& model, const std::string& file) {
  const Doc doc(file);
  const Json root = doc.Parse(text);
  TrajectoryDocument out;
  out.motion_id = doc.String(doc.Get(root, "", "motion_id"), "motion_id");
  out.category = doc.String(doc.Get(root, "", "category"), "category");
  const Json& layout = doc.Array(doc.Get(root, "", "layout"), "layout");
  if (layout.size() != model.dof())
    doc.Fail("layout", "trajectory has " + std::to_string(layout.size()) + " pose entries, model '" + model.name() +
                           "' expects " + std::to_string(model.dof()));
  for (std::size_t k = 0; k < model.joint_count(); ++k)
    if (doc.String(layout[6 + k], Doc::Index("layout", 6 + k)) != model.revolute_joint(k).name)
      doc.Fail(Doc::Index("layout", 6 + k), "joint order does not match model '" + model.name() + "'");

  const Json& frames = doc.Array(doc.Get(root, "", "frames"), "frames");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const std::string p = Doc::Index("frames", t);
    const Json& f = frames[t];
    out.subject.frames.push_back(doc.Integer(doc.Get(f, p, "frame"), Doc::Join(p, "frame")));
    const Json& pose = doc.Array(doc.Get(f, p, "pose"), Doc::Join(p, "pose"));
    if (pose.size() != model.dof()) doc.Fail(Doc::Join(p, "pose"), "wrong number of pose entries");
    std::vector<double> x;
    for (std::size_t i = 0; i < pose.size(); ++i) x.push_back(doc.Number(pose[i], Doc::Index(Doc::Join(p, "pose"), i)));
    FitResult fit;
    fit.pose = PoseVector::FromFlat(x, model.joint_count());
    fit.objective = doc.Number(doc.Get(f, p, "objective"), Doc::Join(p, "objective"));
    fit.iterations = static_cast<int>(doc.Integer(doc.Get(f, p, "evaluations"), Doc::Join(p, "evaluations")));
    fit.converged = doc.Bool(doc.Get(f, p, "converged"), Doc::Join(p, "converged"));
    out.subject.fits.push_back(std::move(fit));
  }

  if (const Json* objs = doc.Find(root, "objects")) {
    doc.Array(*objs, "objects");
    for (std::size_t i = 0; i < objs->size(); ++i) {
      const std::string p = Doc::Index("objects", i);
      const Json& o = (*objs)[i];
      ObjectTrack track;
      track.name = doc.String(doc.Get(o, p, "name"), Doc::Join(p, "name"));
      track.marker_count = static_cast<std::size_t>(doc.Integer(doc.Get(o, p, "marker_count"), Doc::Join(p, "marker_count")));
      const Json& fr = doc.Array(doc.Get(o, p, "frames"), Doc::Join(p, "frames"));
      for (std::size_t t = 0; t < fr.size(); ++t) track.frames.push_back(doc.Integer(fr[t], Doc::Index(Doc::Join(p, "frames"), t)));
      const std::string pp = Doc::Join(p, "poses");
      const Json& poses = doc.Array(doc.Get(o, p, "poses"), pp);
      if (poses.size() != track.frames.size()) doc.Fail(pp, "pose count does not match frame count");
      for (std::size_t t = 0; t < poses.size(); ++t) {
        const std::string q = Doc::Index(pp, t);
        if (!poses[t].is_array() || poses[t].size() != 6) doc.Fail(q, "expected 6 numbers");
        RigidPose rp;
        for (int k = 0; k < 3; ++k) rp.translation[k] = doc.Number(poses[t][k], q);
        for (int k = 0; k < 3; ++k) rp.rotation[k] = doc.Number(poses[t][3 + k], q);
        track.poses.push_back(rp);
      }
      out.objects.push_back(std::move(track));
    }
  }
  return out;
}

// ---- timelines ----

std::string EmitTimeline(const TimelineDocument& doc) {
  Json frames = Json::array();
  for (std::size_t t = 0; t < doc.timeline.size(); ++t) {
    Json contacts = Json::array();
    for (const ContactPair& c : doc.timeline.contacts[t])
      contacts.push_back({{"segment", c.segment}, {"element", c.element}});
    frames.push_back({{"frame", doc.timeline.frames[t]}, {"contacts", contacts}});
  }
  return Dump(Json{{"motion_id", doc.motion_id},
                   {"category", doc.category},
                   {"fps", doc.timeline.fps},
                   {"frames", frames}});
}

TimelineDocument ParseTimeline(const std::string& text, const std::string& file) {
  const Doc doc(file);
  const Json root = doc.Parse(text);
  TimelineDocument out;
  out.motion_id = doc.String(doc.Get(root, "", "motion_id"), "motion_id");
  out.category = doc.String(doc.Get(root, "", "category"), "category");
  if (const Json* fps = doc.Find(root, "fps")) out.timeline.fps = doc.Number(*fps, "fps");
  const Json& frames = doc.Array(doc.Get(root, "", "frames"), "frames");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const std::string p = Doc::Index("frames", t);
    out.timeline.frames.push_back(doc.Integer(doc.Get(frames[t], p, "frame"), Doc::Join(p, "frame")));
    const std::string cp = Doc::Join(p, "contacts");
    const Json& cs = doc.Array(doc.Get(frames[t], p, "contacts"), cp);
    std::vector<ContactPair> pairs;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const std::string q = Doc::Index(cp, i);
      pairs.push_back({doc.String(doc.Get(cs[i], q, "segment"), Doc::Join(q, "segment")),
                       doc.String(doc.Get(cs[i], q, "element"), Doc::Join(q, "element"))});
    }
    std::sort(pairs.begin(), pairs.end());
    out.timeline.contacts.push_back(std::move(pairs));
  }
  return out;
}

// ---- sequences ----

std::string EmitSequence(const TransitionSequence& sequence) {
  Json records = Json::array();
  for (const TransitionRecord& r : sequence.records) {
    records.push_back({{"from", r.from.Label()},
                       {"to", r.to ? Json(r.to->Label()) : Json(nullptr)},
                       {"start_frame", r.start_frame},
                       {"duration_frames", r.duration_frames},
                       {"boundary", r.boundary}});
  }
  return Dump(Json{{"motion_id", sequence.motion_id}, {"category", sequence.category}, {"records", records}});
}

TransitionSequence ParseSequence(const std::string& text, const std::string& file) {
  const Doc doc(file);
  const Json root = doc.Parse(text);
  TransitionSequence seq;
  seq.motion_id = doc.String(doc.Get(root, "", "motion_id"), "motion_id");
  seq.category = doc.String(doc.Get(root, "", "category"), "category");
  const Json& records = doc.Array(doc.Get(root, "", "records"), "records");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string p = Doc::Index("records", i);
    const Json& r = records[i];
    TransitionRecord rec;
    try {
      rec.from = SupportPose::FromLabel(doc.String(doc.Get(r, p, "from"), Doc::Join(p, "from")));
      const Json& to = doc.Get(r, p, "to");
      if (!to.is_null()) rec.to = SupportPose::FromLabel(doc.String(to, Doc::Join(p, "to")));
    } catch (const ValidationError& e) {
      doc.Fail(p, e.what());
    }
    rec.start_frame = doc.Integer(doc.Get(r, p, "start_frame"), Doc::Join(p, "start_frame"));
    rec.duration_frames = doc.Integer(doc.Get(r, p, "duration_frames"), Doc::Join(p, "duration_frames"));
    if (rec.duration_frames < 0) doc.Fail(Doc::Join(p, "duration_frames"), "must not be negative");
    if (const Json* b = doc.Find(r, "boundary")) rec.boundary = doc.Bool(*b, Doc::Join(p, "boundary"));
    rec.motion_id = seq.motion_id;
    seq.records.push_back(std::move(rec));
  }
  return seq;
}

std::string EmitSequenceCsv(const TransitionSequence& sequence) {
  std::string out = "start,end,label,duration\n";
  for (const TransitionRecord& r : sequence.records) {
    out += std::to_string(r.start_frame) + "," + std::to_string(r.start_frame + r.duration_frames) + "," +
           r.from.Label() + "," + std::to_string(r.duration_frames) + "\n";
  }
  return out;
}

std::vector<std::string> ParsePoseLabels(const std::string& text, const std::string& file) {
  const Doc doc(file);
  const Json root = doc.Parse(text);
  if (root.is_object() && root.contains("records")) return ParseSequence(text, file).Labels();
  const Json* list = &root;
  std::string path;
  if (root.is_object()) {
    list = &doc.Get(root, "", "annotation");
    path = "annotation";
  }
  doc.Array(*list, path);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const std::string p = Doc::Index(path, i);
    try {
      labels.push_back(SupportPose::FromLabel(doc.String((*list)[i], p)).Label());
    } catch (const ValidationError& e) {
      doc.Fail(p, e.what());
    }
  }
  return labels;
}

// ---- analytics ----

namespace {

// Poses ordered by origin count, then label; destination-only poses follow by label.
std::vector<std::string> TableAxis(const TransitionStats& stats) {
  std::vector<std::string> axis = stats.SortedPoses();
  std::set<std::string> extra;
  for (const auto& [key, cell] : stats.cells)
    if (!stats.pose_totals.contains(key.second)) extra.insert(key.second);
  axis.insert(axis.end(), extra.begin(), extra.end());
  return axis;
}

}  // namespace

std::string EmitTableCsv(const TransitionStats& stats) {
  const std::vector<std::string> axis = TableAxis(stats);
  std::string out = "from";
  for (const std::string& to : axis) out += "," + to;
  out += ",total\n";
  for (const std::string& from : stats.SortedPoses()) {
    out += from;
    for (const std::string& to : axis) {
      const auto it = stats.cells.find({from, to});
      out += ",";
      out += it == stats.cells.end() ? "--" : Fixed2(it->second.appearance_pct) + "/" + Fixed2(it->second.time_pct);
    }
    const TransitionCell& total = stats.pose_totals.at(from);
    out += "," + Fixed2(total.appearance_pct) + "/" + Fixed2(total.time_pct) + "\n";
  }
  return out;
}

std::string EmitTableCellsCsv(const TransitionStats& stats) {
  std::string out = "from,to,count,frames,appearance_pct,time_pct\n";
  for (const auto& [key, cell] : stats.cells) {
    out += key.first + "," + key.second + "," + std::to_string(cell.count) + "," + std::to_string(cell.frames) + "," +
           Fixed2(cell.appearance_pct) + "," + Fixed2(cell.time_pct) + "\n";
  }
  return out;
}

std::string EmitHistogramCsv(const std::vector<Histogram>& histograms) {
  std::string out = "bin_start,bin_end,count,category\n";
  for (const Histogram& h : histograms) {
    for (const auto& [bin, count] : h.counts) {
      out += std::to_string(bin * h.bin_width) + "," + std::to_string((bin + 1) * h.bin_width) + "," +
             std::to_string(count) + "," + h.category + "\n";
    }
  }
  return out;
}

std::string EmitMixtures(const std::vector<NamedMixture>& mixtures) {
  Json list = Json::array();
  for (const NamedMixture& m : mixtures) {
    Json j{{"from", m.transition.first}, {"to", m.transition.second}, {"samples", m.samples}};
    if (m.fit) {
      const MixtureFit& f = *m.fit;
      j["weights"] = Json::array({f.weight1, f.weight2});
      j["means"] = Json::array({f.mean1, f.mean2});
      j["sigmas"] = Json::array({f.sigma1, f.sigma2});
      j["log_likelihood"] = f.log_likelihood;
      j["converged"] = f.converged;
      j["tolerance_reached"] = f.tolerance_reached;
      j["iterations"] = f.iterations;
      j["separation"] = f.separation;
      j["weakly_separated"] = f.weakly_separated;
    } else {
      j["skipped"] = m.skipped;
    }
    list.push_back(std::move(j));
  }
  return Dump(Json{{"mixtures", list}});
}

namespace {

std::string DotQuote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string EmitGraphDot(const TransitionGraph& graph) {
  std::string out = "digraph transitions {\n  node [shape=box];\n";
  for (const std::string& n : graph.nodes) out += "  " + DotQuote(n) + ";\n";
  for (const GraphEdge& e : graph.edges) {
    out += "  " + DotQuote(e.from) + " -> " + DotQuote(e.to) + " [label=\"" + std::to_string(e.count) + "\"";
    if (e.change == ChangeClass::kMulti) out += ", color=red, fontcolor=red";
    out += "];\n";
  }
  return out + "}\n";
}

std::string EmitGraphJson(const TransitionGraph& graph) {
  Json edges = Json::array();
  for (const GraphEdge& e : graph.edges) {
    edges.push_back({{"from", e.from},
                     {"to", e.to},
                     {"count", e.count},
                     {"change", e.change == ChangeClass::kMulti ? "multi" : "single"}});
  }
  return Dump(Json{{"nodes", graph.nodes}, {"edges", edges}, {"total_count", graph.total_count()}});
}

std::string EmitEvalReport(const EvalReport& report, const std::string& motion_id) {
  static const char* ops[] = {"match", "substitute", "missed", "extra"};
  Json trace = Json::array();
  for (const AlignmentStep& s : report.trace) {
    trace.push_back({{"op", ops[static_cast<int>(s.op)]},
                     {"annotated_index", s.annotated_index ? Json(*s.annotated_index) : Json(nullptr)},
                     {"detected_index", s.detected_index ? Json(*s.detected_index) : Json(nullptr)},
                     {"annotated", s.annotated_label},
                     {"detected", s.detected_label}});
  }
  Json j;
  if (!motion_id.empty()) j["motion_id"] = motion_id;
  j["n_annotated"] = report.n_annotated;
  j["n_detected"] = report.n_detected;
  j["n_missed"] = report.n_missed;
  j["n_incorrect"] = report.n_incorrect;
  j["n_substituted"] = report.n_substituted;
  j["n_extra"] = report.n_extra;
  j["discrepancies"] = report.discrepancies;
  j["trace"] = trace;
  return Dump(j);
}

}  // namespace supportseg
