#include "kplab/session.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <set>

namespace kplab {

namespace {

constexpr const char* kManifest = "session.json";
constexpr const char* kDetections = "detections.json";
constexpr const char* kPoses = "poses.json";
constexpr const char* kSelection = "selection.json";
constexpr const char* kAnnotations = "annotations.json";
constexpr const char* kKeypoints = "keypoints.json";
constexpr const char* kLabels = "labels.json";
constexpr const char* kQa = "qa.json";

constexpr const char* kAllFiles[] = {kManifest,  kDetections, kPoses, kSelection,
                                     kAnnotations, kKeypoints, kLabels, kQa};

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json versioned() { return Json{{"schema_version", kSchemaVersion}}; }

template <class F>
auto in_file(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSchema) throw Error(ErrorCode::kSchema, name + ": " + e.what());
    throw;
  }
}

void check_version(const JsonReader& r) {
  const int v = r["schema_version"].integer();
  if (v != kSchemaVersion) r["schema_version"].fail("unsupported version " + std::to_string(v));
}

// Frame ids in manifest order, restricted to those present in `m`.
template <class Map>
std::vector<std::string> ordered_keys(const ScanSession& s, const Map& m) {
  std::vector<std::string> out;
  for (const FrameRecord& f : s.frames)
    if (m.count(f.id)) out.push_back(f.id);
  return out;
}

std::vector<Keypoint3D> sorted_keypoints(std::vector<Keypoint3D> kps) {
  std::sort(kps.begin(), kps.end(), [](const auto& a, const auto& b) { return a.keypoint_id < b.keypoint_id; });
  return kps;
}

}  // namespace

const FrameRecord* ScanSession::find_frame(const std::string& id) const {
  for (const FrameRecord& f : frames)
    if (f.id == id) return &f;
  return nullptr;
}

int ScanSession::frame_index(const std::string& id) const {
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (frames[i].id == id) return static_cast<int>(i);
  return -1;
}

void ScanSession::validate() const {
  const auto bad = [](const std::string& msg) { throw Error(ErrorCode::kSchema, msg); };
  if (num_keypoints < 0) bad("num_keypoints must be non-negative");
  std::set<std::string> ids;
  for (const FrameRecord& f : frames) {
    if (f.id.empty()) bad("frame id must be non-empty");
    if (!ids.insert(f.id).second) bad("duplicate frame id '" + f.id + "'");
  }
  if (!sym.permutations.empty()) sym.validate(num_keypoints);
  for (const auto& [id, det] : detections) {
    if (!ids.count(id)) bad("detections for unknown frame '" + id + "'");
    for (const TagObservation& t : det.tags)
      if (!board.tags.count(t.tag_id)) bad("frame '" + id + "' detects unknown tag " + std::to_string(t.tag_id));
  }
  for (const auto& [id, p] : poses)
    if (!ids.count(id)) bad("pose for unknown frame '" + id + "'");
  for (const std::string& id : selection)
    if (!ids.count(id)) bad("selection names unknown frame '" + id + "'");
  std::set<std::pair<std::string, int>> seen;
  for (const Annotation2D& a : annotations) {
    if (!ids.count(a.frame_id)) bad("annotation on unknown frame '" + a.frame_id + "'");
    if (a.keypoint_id < 1 || a.keypoint_id > num_keypoints)
      bad("annotation keypoint id " + std::to_string(a.keypoint_id) + " outside [1, " +
          std::to_string(num_keypoints) + "]");
    if (!seen.emplace(a.frame_id, a.keypoint_id).second)
      bad("duplicate annotation of keypoint " + std::to_string(a.keypoint_id) + " on frame '" + a.frame_id + "'");
  }
  for (const Keypoint3D& kp : keypoints)
    if (kp.keypoint_id < 1 || kp.keypoint_id > num_keypoints)
      bad("keypoint id " + std::to_string(kp.keypoint_id) + " out of range");
  if (!labels.empty() && keypoints.empty()) bad("labels present without keypoints");
  for (const auto& [id, l] : labels) {
    if (!ids.count(id)) bad("labels for unknown frame '" + id + "'");
    if (l.uvd.size() != keypoints.size() || l.in_front.size() != keypoints.size())
      bad("labels for frame '" + id + "' do not match the keypoint count");
  }
  if (qa && labels.empty()) bad("qa present without labels");
}

// ---------------------------------------------------------------------------
// Serialization

std::map<std::string, std::string> serialize_session(const ScanSession& s) {
  std::map<std::string, std::string> files;

  Json m = versioned();
  m["session_id"] = s.session_id;
  m["num_keypoints"] = s.num_keypoints;
  m["rig"] = to_json(s.rig);
  m["board"] = to_json(s.board);
  m["symmetry"] = to_json(s.sym);
  m["qa_threshold_px"] = canonical(s.qa_threshold_px);
  Json frames = Json::array();
  for (const FrameRecord& f : s.frames) {
    Json jf{{"id", f.id}, {"left", f.left}, {"right", f.right}};
    if (!f.depth.empty()) jf["depth"] = f.depth;
    jf["checksums"] = f.checksums;
    frames.push_back(jf);
  }
  m["frames"] = frames;
  files[kManifest] = dump(m);

  if (!s.detections.empty()) {
    Json j = versioned();
    j["frames"] = Json::array();
    for (const std::string& id : ordered_keys(s, s.detections)) j["frames"].push_back(to_json(s.detections.at(id)));
    files[kDetections] = dump(j);
  }
  if (!s.poses.empty()) {
    Json j = versioned();
    j["frames"] = Json::array();
    for (const std::string& id : ordered_keys(s, s.poses)) {
      Json p{{"frame_id", id}};
      p.update(to_json(s.poses.at(id)));
      j["frames"].push_back(p);
    }
    files[kPoses] = dump(j);
  }
  if (!s.selection.empty()) {
    Json j = versioned();
    j["frames"] = s.selection;
    files[kSelection] = dump(j);
  }
  if (!s.annotations.empty() || s.annotation_revision > 0) {
    Json j = versioned();
    j["revision"] = s.annotation_revision;
    j["annotations"] = Json::array();
    for (const Annotation2D& a : s.annotations) j["annotations"].push_back(to_json(a));
    files[kAnnotations] = dump(j);
  }
  if (!s.keypoints.empty()) {
    Json j = versioned();
    j["keypoints"] = Json::array();
    for (const Keypoint3D& kp : sorted_keypoints(s.keypoints)) j["keypoints"].push_back(to_json(kp));
    files[kKeypoints] = dump(j);
  }
  if (!s.labels.empty()) {
    Json j = versioned();
    j["frames"] = Json::array();
    for (const std::string& id : ordered_keys(s, s.labels)) {
      const FrameLabels& l = s.labels.at(id);
      Json uvd = Json::array();
      for (std::size_t k = 0; k < l.uvd.size(); ++k) uvd.push_back(l.in_front[k] ? to_json(l.uvd[k]) : Json());
      j["frames"].push_back({{"frame_id", id}, {"uvd", uvd}, {"flagged", l.flagged}});
    }
    files[kLabels] = dump(j);
  }
  if (s.qa) {
    Json j = versioned();
    j["accept"] = s.qa->accept;
    j["worst_keypoint"] = s.qa->worst_keypoint;
    j["worst_rmse"] = canonical(s.qa->worst_rmse);
    j["threshold_px"] = canonical(s.qa_threshold_px);
    files[kQa] = dump(j);
  }
  return files;
}

void save_session(const ScanSession& s, const fs::path& dir) {
  s.validate();
  fs::create_directories(dir);
  const auto files = serialize_session(s);
  for (const char* name : kAllFiles) {
    const auto it = files.find(name);
    if (it != files.end()) {
      write_text_atomic(dir / name, it->second);
    } else {
      std::error_code ec;
      fs::remove(dir / name, ec);
    }
  }
}

ScanSession load_session(const fs::path& dir, bool verify_images) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kMissingFile, "no session directory at " + dir.string());
  ScanSession s;

  const Json manifest = parse_json_file(dir / kManifest);
  in_file(kManifest, [&] {
    const JsonReader r(manifest, "");
    check_version(r);
    s.session_id = r["session_id"].string();
    s.num_keypoints = r["num_keypoints"].integer();
    if (s.num_keypoints < 0) r["num_keypoints"].fail("must be non-negative");
    s.rig = rig_from(r["rig"]);
    s.board = board_from(r["board"]);
    if (r.has("symmetry")) {
      s.sym = symmetry_from(r["symmetry"]);
      if (!s.sym.permutations.empty() && s.sym.size() != s.num_keypoints)
        r["symmetry"].fail("permutation length differs from num_keypoints");
    }
    if (r.has("qa_threshold_px")) s.qa_threshold_px = r["qa_threshold_px"].number();
    const JsonReader frames = r["frames"];
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const JsonReader f = frames[i];
      FrameRecord rec;
      rec.id = f["id"].string();
      rec.left = f["left"].string();
      rec.right = f["right"].string();
      if (f.has("depth")) rec.depth = f["depth"].string();
      if (f.has("checksums")) {
        const JsonReader c = f["checksums"];
        if (!c.raw().is_object()) c.fail("expected an object");
        for (const auto& [key, value] : c.raw().items()) rec.checksums[key] = c[key].string();
      }
      if (s.find_frame(rec.id)) f["id"].fail("duplicate frame id '" + rec.id + "'");
      s.frames.push_back(std::move(rec));
    }
    return 0;
  });

  for (const FrameRecord& f : s.frames) {
    if (!verify_images) break;
    for (const auto& [kind, ref] : {std::pair{"left", f.left}, {"right", f.right}, {"depth", f.depth}}) {
      if (ref.empty()) continue;
      const fs::path file = dir / ref;
      if (!fs::exists(file))
        throw Error(ErrorCode::kMissingFile, "frame '" + f.id + "': missing " + kind + " image " + ref);
      const auto sum = f.checksums.find(kind);
      if (sum != f.checksums.end() && sha256_file(file) != sum->second)
        throw Error(ErrorCode::kChecksumMismatch, "frame '" + f.id + "': " + kind + " image " + ref +
                                                      " does not match its checksum");
    }
  }

  const auto known_frame = [&](const JsonReader& r) {
    const std::string id = r.string();
    if (!s.find_frame(id)) r.fail("unknown frame id '" + id + "'");
    return id;
  };

  if (fs::exists(dir / kDetections)) {
    const Json j = parse_json_file(dir / kDetections);
    in_file(kDetections, [&] {
      const JsonReader r(j, "");
      check_version(r);
      const JsonReader frames = r["frames"];
      for (std::size_t i = 0; i < frames.size(); ++i) {
        known_frame(frames[i]["frame_id"]);
        TagDetections det = detections_from(frames[i]);
        for (std::size_t t = 0; t < det.tags.size(); ++t)
          if (!s.board.tags.count(det.tags[t].tag_id))
            frames[i]["tags"][t]["id"].fail("unknown tag id " + std::to_string(det.tags[t].tag_id));
        if (!s.detections.emplace(det.frame_id, det).second) frames[i]["frame_id"].fail("duplicate frame");
      }
      return 0;
    });
  }

  if (fs::exists(dir / kPoses)) {
    const Json j = parse_json_file(dir / kPoses);
    in_file(kPoses, [&] {
      const JsonReader r(j, "");
      check_version(r);
      const JsonReader frames = r["frames"];
      for (std::size_t i = 0; i < frames.size(); ++i) {
        const std::string id = known_frame(frames[i]["frame_id"]);
        if (!s.poses.emplace(id, pose_estimate_from(frames[i])).second) frames[i]["frame_id"].fail("duplicate frame");
      }
      return 0;
    });
  }

  if (fs::exists(dir / kSelection)) {
    const Json j = parse_json_file(dir / kSelection);
    in_file(kSelection, [&] {
      const JsonReader r(j, "");
      check_version(r);
      const JsonReader frames = r["frames"];
      for (std::size_t i = 0; i < frames.size(); ++i) s.selection.push_back(known_frame(frames[i]));
      return 0;
    });
  }

  if (fs::exists(dir / kAnnotations)) {
    const Json j = parse_json_file(dir / kAnnotations);
    in_file(kAnnotations, [&] {
      const JsonReader r(j, "");
      check_version(r);
      if (r.has("revision")) s.annotation_revision = r["revision"].integer();
      const JsonReader list = r["annotations"];
      for (std::size_t i = 0; i < list.size(); ++i) {
        known_frame(list[i]["frame_id"]);
        const Annotation2D a = annotation_from(list[i]);
        if (a.keypoint_id < 1 || a.keypoint_id > s.num_keypoints)
          list[i]["keypoint_id"].fail("outside [1, " + std::to_string(s.num_keypoints) + "]");
        s.annotations.push_back(a);
      }
      return 0;
    });
  }

  if (fs::exists(dir / kKeypoints)) {
    const Json j = parse_json_file(dir / kKeypoints);
    in_file(kKeypoints, [&] {
      const JsonReader r(j, "");
      check_version(r);
      const JsonReader list = r["keypoints"];
      for (std::size_t i = 0; i < list.size(); ++i) {
        const Keypoint3D kp = keypoint_from(list[i]);
        if (kp.keypoint_id < 1 || kp.keypoint_id > s.num_keypoints) list[i]["keypoint_id"].fail("out of range");
        s.keypoints.push_back(kp);
      }
      return 0;
    });
  }

  if (fs::exists(dir / kLabels)) {
    const Json j = parse_json_file(dir / kLabels);
    in_file(kLabels, [&] {
      const JsonReader r(j, "");
      check_version(r);
      const JsonReader frames = r["frames"];
      for (std::size_t i = 0; i < frames.size(); ++i) {
        const std::string id = known_frame(frames[i]["frame_id"]);
        FrameLabels l;
        const JsonReader uvd = frames[i]["uvd"];
        for (std::size_t k = 0; k < uvd.size(); ++k) {
          const bool present = !uvd[k].is_null();
          l.uvd.push_back(present ? uvd_from(uvd[k]) : Uvd{});
          l.in_front.push_back(present);
        }
        l.flagged = frames[i]["flagged"].boolean();
        if (!s.labels.emplace(id, std::move(l)).second) frames[i]["frame_id"].fail("duplicate frame");
      }
      return 0;
    });
  }

  if (fs::exists(dir / kQa)) {
    const Json j = parse_json_file(dir / kQa);
    in_file(kQa, [&] {
      const JsonReader r(j, "");
      check_version(r);
      QaResult qa;
      qa.accept = r["accept"].boolean();
      qa.worst_keypoint = r["worst_keypoint"].integer();
      qa.worst_rmse = r["worst_rmse"].number();
      s.qa = qa;
      return 0;
    });
  }

  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Lock

SessionLock::SessionLock(const fs::path& dir) {
  const fs::path file = dir / ".lock";
  fd_ = ::open(file.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(ErrorCode::kIo, "cannot open lock file " + file.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw Error(ErrorCode::kLocked, "session " + dir.string() + " is locked by another writer");
  }
}

SessionLock::~SessionLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

// ---------------------------------------------------------------------------
// Stages

void stage_poses(ScanSession& s) {
  s.poses.clear();
  s.selection.clear();
  s.keypoints.clear();
  s.labels.clear();
  s.qa.reset();
  for (const FrameRecord& f : s.frames) {
    const auto det = s.detections.find(f.id);
    if (det == s.detections.end() || det->second.tags.size() < 3) continue;
    try {
      s.poses.emplace(f.id, estimate_camera_pose(s.board, det->second, s.rig.left));
    } catch (const Error& e) {
      throw Error(e.code(), "frame '" + f.id + "': " + e.what());
    }
  }
  if (s.poses.empty()) throw Error(ErrorCode::kTooFewTags, "no frame sees three or more tags");
}

void stage_select(ScanSession& s, int k) {
  std::vector<std::string> ids = ordered_keys(s, s.poses);
  if (ids.empty()) throw Error(ErrorCode::kEmptyInput, "no posed frames to select from");
  std::vector<Rigid> poses;
  for (const std::string& id : ids) poses.push_back(s.poses.at(id).pose);
  s.selection.clear();
  for (int i : fps_select(poses, std::min<int>(k, static_cast<int>(poses.size())))) s.selection.push_back(ids[i]);
}

void stage_triangulate(ScanSession& s) {
  s.keypoints.clear();
  s.labels.clear();
  s.qa.reset();
  if (s.num_keypoints < 1) throw Error(ErrorCode::kEmptyInput, "session defines no keypoints");
  std::vector<Keypoint3D> out;
  for (int id = 1; id <= s.num_keypoints; ++id) {
    std::vector<std::pair<int, ViewObservation>> views;
    for (const Annotation2D& a : s.annotations) {
      if (a.keypoint_id != id) continue;
      const auto pose = s.poses.find(a.frame_id);
      if (pose == s.poses.end()) continue;
      views.push_back({s.frame_index(a.frame_id), ViewObservation{pose->second.pose, s.rig.left, a.uv}});
    }
    std::sort(views.begin(), views.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<ViewObservation> obs;
    for (auto& v : views) obs.push_back(v.second);
    out.push_back(triangulate_keypoint(obs, id));
  }
  s.keypoints = std::move(out);
}

void stage_propagate(ScanSession& s) {
  s.labels.clear();
  s.qa.reset();
  if (s.keypoints.empty()) throw Error(ErrorCode::kEmptyInput, "no triangulated keypoints to propagate");
  const std::vector<Keypoint3D> kps = sorted_keypoints(s.keypoints);
  const std::vector<std::string> ids = ordered_keys(s, s.poses);
  std::vector<StereoFrame> frames;
  for (const std::string& id : ids) frames.push_back({s.poses.at(id).pose, s.rig});
  const std::vector<FrameLabels> labels = propagate_labels(kps, frames);
  for (std::size_t i = 0; i < ids.size(); ++i) s.labels.emplace(ids[i], labels[i]);
}

void stage_qa(ScanSession& s) {
  if (s.labels.empty()) throw Error(ErrorCode::kEmptyInput, "qa requires propagated labels");
  s.qa = qa_gate(s.keypoints, s.qa_threshold_px);
}

std::map<std::string, std::map<int, double>> annotation_residuals(const ScanSession& s) {
  std::map<int, Vec3> positions;
  for (const Keypoint3D& kp : s.keypoints) positions[kp.keypoint_id] = kp.position;
  std::map<std::string, std::map<int, double>> out;
  for (const Annotation2D& a : s.annotations) {
    const auto pose = s.poses.find(a.frame_id);
    const auto pos = positions.find(a.keypoint_id);
    if (pose == s.poses.end() || pos == positions.end()) continue;
    const ViewObservation v{pose->second.pose, s.rig.left, a.uv};
    out[a.frame_id][a.keypoint_id] = reprojection_residuals(pos->second, std::span(&v, 1)).front();
  }
  return out;
}

void run_pipeline(ScanSession& s, const PipelineOptions& options) {
  const auto stage = [](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      throw Error(e.code(), std::string(name) + ": " + e.what());
    }
  };
  stage("poses", [&] {
    if (s.frames.empty()) throw Error(ErrorCode::kEmptyInput, "session has no frames");
    const double covered = static_cast<double>(s.detections.size()) / static_cast<double>(s.frames.size());
    if (covered < options.min_detection_fraction)
      throw Error(ErrorCode::kTooFewTags, "detections cover " + std::to_string(s.detections.size()) + " of " +
                                              std::to_string(s.frames.size()) + " frames");
    stage_poses(s);
  });
  stage("select", [&] { stage_select(s, options.keyframes); });
  stage("triangulate", [&] { stage_triangulate(s); });
  stage("propagate", [&] { stage_propagate(s); });
  stage("qa", [&] { stage_qa(s); });
}

}  // namespace kplab
