#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "kplab/board_pose.hpp"
#include "kplab/geometry.hpp"
#include "kplab/rng.hpp"

namespace kplab {

/// Reprojection-noise statistics. All magnitudes are root-mean-square 2D
/// errors in pixels, as measured after fitting.
struct NoiseModel {
  double pose_corner_rmse = 1.21;
  double annotation_rmse_mean = 2.28;
  double annotation_rmse_std = 0.83;

  void validate() const;
};

/// Camera placements on a spherical shell around the board center. Angles are
/// in degrees; elevation is measured up from the board plane, azimuth about
/// the board normal with 0 facing the board's -y edge.
struct CaptureGeometry {
  double radius_min = 0.45;
  double radius_max = 1.0;
  double elevation_min_deg = 30.0;
  double elevation_max_deg = 70.0;
  double azimuth_min_deg = -60.0;
  double azimuth_max_deg = 60.0;
  int poses_per_scan = 200;
  FiducialBoard board = FiducialBoard::perimeter();
  Intrinsics intrinsics = default_intrinsics();

  /// Rectified 640x480 camera with f = 400 px.
  static Intrinsics default_intrinsics();
  void validate() const;
};

/// World-to-camera pose of a camera at `eye` looking at `target` with its x
/// axis parallel to the board plane.
Rigid look_at(const Vec3& eye, const Vec3& target);

/// Samples poses uniformly over the geometry's radius/elevation/azimuth box,
/// keeping only poses that see at least three complete tags.
std::vector<Rigid> sample_trajectory(const CaptureGeometry& geom, Rng& rng);

/// Per-axis standard deviation of isotropic 2D Gaussian noise whose
/// root-mean-square magnitude is `rmse`.
inline double isotropic_sigma(double rmse) { return rmse / std::sqrt(2.0); }

struct SimulationConfig {
  int n_views_min = 4;
  int n_views_max = 6;
  int n_trials = 10000;
  std::uint64_t seed = 0;
  /// Workspace box above the board center (m): x/y extent and height.
  double workspace_xy = 0.4;
  double workspace_height = 0.3;
  /// When false (the default) the keypoint is projected into the estimated
  /// poses before dithering; when true it is projected with the true poses, so
  /// pose error also reaches the triangulated point.
  bool project_through_true_poses = false;

  void validate() const;
};

struct SimulationResult {
  double rmse_m = 0;
  std::vector<double> errors_m;  // one per trial, in trial order
  std::vector<int> views_used;
};

/// Monte Carlo estimate of the 3D keypoint labeling error.
SimulationResult simulate_labeling_error(const CaptureGeometry& geom, const NoiseModel& noise,
                                         const SimulationConfig& config);

inline constexpr double kDepthSensorErrorM = 0.017;

/// Accuracy ratio of a labeling RMSE against the 17 mm depth-sensor error.
double compare_to_sensor(double rmse_m);

}  // namespace kplab
