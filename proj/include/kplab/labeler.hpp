#pragma once

#include <span>
#include <string>
#include <vector>

#include "kplab/board_pose.hpp"
#include "kplab/geometry.hpp"

namespace kplab {

/// A clicked 2D keypoint on one frame.
struct Annotation2D {
  std::string frame_id;
  int keypoint_id = 0;
  Vec2 uv = Vec2::Zero();
  bool operator==(const Annotation2D&) const = default;
};

/// Triangulated keypoint in the board/world frame.
struct Keypoint3D {
  int keypoint_id = 0;
  Vec3 position = Vec3::Zero();
  double rmse = 0;  // px, over the annotated views
  int n_views = 0;
  bool operator==(const Keypoint3D&) const = default;
};

/// One posed observation of a keypoint. `pose` maps world to camera.
struct ViewObservation {
  Rigid pose;
  Intrinsics intrinsics;
  Vec2 uv = Vec2::Zero();
};

inline constexpr int kDefaultKeyframeCount = 6;
inline constexpr double kDefaultQaThresholdPx = 5.0;

/// Greedy farthest-point sampling over camera centers. The seed is the center
/// farthest from the centroid; each next pick maximizes the distance to the
/// selected set. Ties go to the lowest index.
std::vector<int> fps_select(std::span<const Rigid> world_to_camera, int k);

/// Linear initialization from the two views with the widest ray angle, then
/// Levenberg-Marquardt over all views. Throws kTooFewViews for fewer than two
/// views and kDegenerateRays when every ray pair is within 0.1 degrees.
Keypoint3D triangulate_keypoint(std::span<const ViewObservation> views, int keypoint_id = 0);

/// Per-view reprojection error magnitudes (px) of a 3D point.
std::vector<double> reprojection_residuals(const Vec3& position, std::span<const ViewObservation> views);

/// Largest pairwise angle (radians) between viewing rays.
double max_ray_angle(std::span<const ViewObservation> views);

/// Stereo frame used for label propagation; `pose` maps world to left camera.
struct StereoFrame {
  Rigid pose;
  Rig rig;
};

struct FrameLabels {
  std::vector<Uvd> uvd;       // one per keypoint; zero where not in front
  std::vector<bool> in_front;
  bool flagged = false;       // some keypoint is behind the camera
  bool operator==(const FrameLabels&) const = default;
};

std::vector<FrameLabels> propagate_labels(std::span<const Keypoint3D> keypoints,
                                          std::span<const StereoFrame> frames);

struct QaResult {
  bool accept = true;
  int worst_keypoint = 0;
  double worst_rmse = 0;
  bool operator==(const QaResult&) const = default;
};

/// Rejects iff some keypoint rmse is strictly greater than the threshold.
QaResult qa_gate(std::span<const Keypoint3D> keypoints, double threshold_px = kDefaultQaThresholdPx);

}  // namespace kplab
