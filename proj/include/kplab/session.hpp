#pragma once

// On-disk scan sessions and the labeling pipeline that runs over them.
//
// A session is a directory:
//   session.json      manifest: id, rig, board, symmetry, frames
//   detections.json   tag corners per frame
//   poses.json        board-to-camera pose per frame
//   selection.json    keyframes picked for annotation
//   annotations.json  clicked 2D keypoints
//   keypoints.json    triangulated keypoints
//   labels.json       propagated UVD labels per posed frame
//   qa.json           accept/reject verdict
// Only session.json is required. Keypoint ids are 1-based everywhere.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kplab/board_pose.hpp"
#include "kplab/formats.hpp"
#include "kplab/labeler.hpp"
#include "kplab/losses.hpp"

namespace kplab {

struct FrameRecord {
  std::string id;
  std::string left;   // image paths relative to the session directory; empty = none
  std::string right;
  std::string depth;
  std::map<std::string, std::string> checksums;  // "left"/"right"/"depth" -> sha256
  bool operator==(const FrameRecord&) const = default;
};

struct ScanSession {
  std::string session_id;
  int num_keypoints = 0;
  Rig rig;
  FiducialBoard board;
  SymmetrySpec sym;  // empty = no symmetry
  double qa_threshold_px = kDefaultQaThresholdPx;
  std::vector<FrameRecord> frames;

  std::map<std::string, TagDetections> detections;
  std::map<std::string, PoseEstimate> poses;
  std::vector<std::string> selection;
  std::vector<Annotation2D> annotations;
  int annotation_revision = 0;
  std::vector<Keypoint3D> keypoints;
  std::map<std::string, FrameLabels> labels;
  std::optional<QaResult> qa;

  const FrameRecord* find_frame(const std::string& id) const;
  int frame_index(const std::string& id) const;  // -1 if absent
  /// Checks cross-references: unique frame ids, detections/poses/labels on
  /// known frames, annotation keypoint ids in range, labels only after
  /// keypoints, qa only after labels.
  void validate() const;
};

/// Throws kSchema naming the file and field, kMissingFile for absent images,
/// kChecksumMismatch when an image no longer matches the manifest. Image
/// checks can be skipped when only the JSON parts are needed.
ScanSession load_session(const fs::path& dir, bool verify_images = true);
/// Writes every present part and removes files for absent ones.
void save_session(const ScanSession& session, const fs::path& dir);

/// Serialized form of each file, exactly as save_session writes it.
std::map<std::string, std::string> serialize_session(const ScanSession& session);

/// Exclusive advisory lock on `<dir>/.lock`; throws kLocked if another
/// writer holds it.
class SessionLock {
 public:
  explicit SessionLock(const fs::path& dir);
  ~SessionLock();
  SessionLock(const SessionLock&) = delete;
  SessionLock& operator=(const SessionLock&) = delete;

 private:
  int fd_ = -1;
};

// Pipeline stages. Each replaces its own output and clears everything
// downstream of it.
void stage_poses(ScanSession& s);
void stage_select(ScanSession& s, int k = kDefaultKeyframeCount);
void stage_triangulate(ScanSession& s);
void stage_propagate(ScanSession& s);
void stage_qa(ScanSession& s);

/// Reprojection residual (px) of every triangulated keypoint in each frame
/// where it was annotated: frame id -> keypoint id -> residual.
std::map<std::string, std::map<int, double>> annotation_residuals(const ScanSession& s);

struct PipelineOptions {
  int keyframes = kDefaultKeyframeCount;
  double min_detection_fraction = 0.9;
};

/// poses -> select -> triangulate -> propagate -> qa. Errors are rethrown
/// with the failing stage's name prefixed.
void run_pipeline(ScanSession& s, const PipelineOptions& options = {});

}  // namespace kplab
