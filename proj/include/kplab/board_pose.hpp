#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kplab/geometry.hpp"

namespace kplab {

/// Planar fiducial target. Corners live in the board frame (z = 0) and are
/// ordered counter-clockwise when viewed from +z.
struct FiducialBoard {
  std::map<int, std::array<Vec3, 4>> tags;

  /// Eight square tags along the border of a square board centered on the
  /// origin: four at the corners, four at the edge midpoints.
  static FiducialBoard perimeter(double board_size = 0.56, double tag_size = 0.08);

  std::size_t corner_count() const { return 4 * tags.size(); }
  void validate() const;
  bool operator==(const FiducialBoard&) const = default;
};

struct TagObservation {
  int tag_id = 0;
  std::array<Vec2, 4> corners;
  bool operator==(const TagObservation&) const = default;
};

struct TagDetections {
  std::string frame_id;
  std::vector<TagObservation> tags;
  bool operator==(const TagDetections&) const = default;
};

/// World (board) to camera pose with its corner reprojection RMSE.
struct PoseEstimate {
  Rigid pose;
  double rmse = 0;
  int n_tags = 0;
};

/// Projects every tag fully inside the image (all four corners in front of
/// the camera and within bounds) into detections.
TagDetections render_detections(const FiducialBoard& board, const Rigid& world_to_camera,
                                 const Intrinsics& intr, const std::string& frame_id = {});

/// Planar homography initialization followed by Levenberg-Marquardt on the
/// exponential-map rotation and translation. Throws kTooFewTags below three
/// tags and kSolverDiverged when the refinement cannot produce a finite pose
/// in front of the board.
PoseEstimate estimate_camera_pose(const FiducialBoard& board, const TagDetections& detections,
                                  const Intrinsics& intr);

/// Corner reprojection RMSE of a pose (root mean squared 2D error per corner).
double corner_rmse(const FiducialBoard& board, const TagDetections& detections,
                   const Intrinsics& intr, const Rigid& world_to_camera);

struct TrajectoryPoseStats {
  double mean_rmse = 0;
  double std_rmse = 0;
  double mean_tags = 0;
};

/// Population mean and standard deviation over a trajectory.
TrajectoryPoseStats trajectory_pose_stats(std::span<const PoseEstimate> estimates);

}  // namespace kplab
