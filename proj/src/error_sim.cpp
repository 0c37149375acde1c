#include "kplab/error_sim.hpp"

#include <cmath>
#include <numbers>

#include "kplab/labeler.hpp"

namespace kplab {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
}

void NoiseModel::validate() const {
  if (!(pose_corner_rmse >= 0 && annotation_rmse_mean >= 0 && annotation_rmse_std >= 0))
    throw Error(ErrorCode::kInvalidArgument, "noise model: magnitudes must be non-negative");
}

Intrinsics CaptureGeometry::default_intrinsics() {
  Intrinsics k;
  k.fx = k.fy = 400;
  k.cx = 320;
  k.cy = 240;
  k.width = 640;
  k.height = 480;
  return k;
}

void CaptureGeometry::validate() const {
  if (!(radius_min > 0 && radius_min <= radius_max))
    throw Error(ErrorCode::kInvalidArgument, "capture geometry: radius range must be positive and ordered");
  if (!(elevation_min_deg <= elevation_max_deg && azimuth_min_deg <= azimuth_max_deg))
    throw Error(ErrorCode::kInvalidArgument, "capture geometry: angle ranges must be ordered");
  if (elevation_max_deg >= 90 || elevation_min_deg <= 0)
    throw Error(ErrorCode::kInvalidArgument, "capture geometry: elevation must lie in (0, 90) degrees");
  if (poses_per_scan < 1)
    throw Error(ErrorCode::kInvalidArgument, "capture geometry: poses_per_scan must be positive");
  board.validate();
  intrinsics.validate();
}

void SimulationConfig::validate() const {
  if (n_trials < 1) throw Error(ErrorCode::kInvalidArgument, "simulation: n_trials must be >= 1");
  if (n_views_min < 2 || n_views_min > n_views_max)
    throw Error(ErrorCode::kInvalidArgument, "simulation: view range must satisfy 2 <= min <= max");
  if (!(workspace_xy >= 0 && workspace_height >= 0))
    throw Error(ErrorCode::kInvalidArgument, "simulation: workspace extents must be non-negative");
}

Rigid look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(Vec3::UnitZ());
  if (x.norm() < 1e-9) x = Vec3::UnitX();
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  return {r, -(r * eye)};
}

std::vector<Rigid> sample_trajectory(const CaptureGeometry& geom, Rng& rng) {
  std::vector<Rigid> poses;
  poses.reserve(geom.poses_per_scan);
  const long max_attempts = 100L * geom.poses_per_scan;
  for (long attempt = 0; attempt < max_attempts && static_cast<int>(poses.size()) < geom.poses_per_scan;
       ++attempt) {
    const double r = rng.uniform(geom.radius_min, geom.radius_max);
    const double el = rng.uniform(geom.elevation_min_deg, geom.elevation_max_deg) * kDeg;
    const double az = rng.uniform(geom.azimuth_min_deg, geom.azimuth_max_deg) * kDeg;
    const Vec3 eye(r * std::cos(el) * std::sin(az), -r * std::cos(el) * std::cos(az), r * std::sin(el));
    const Rigid pose = look_at(eye, Vec3::Zero());
    if (render_detections(geom.board, pose, geom.intrinsics).tags.size() >= 3) poses.push_back(pose);
  }
  if (static_cast<int>(poses.size()) < geom.poses_per_scan)
    throw Error(ErrorCode::kDegenerateGeometry, "trajectory: too few poses see three complete tags");
  return poses;
}

SimulationResult simulate_labeling_error(const CaptureGeometry& geom, const NoiseModel& noise,
                                         const SimulationConfig& config) {
  geom.validate();
  noise.validate();
  config.validate();
  if (config.n_views_max > geom.poses_per_scan)
    throw Error(ErrorCode::kInvalidArgument, "simulation: more views requested than poses per scan");

  SimulationResult out;
  out.errors_m.resize(config.n_trials);
  out.views_used.resize(config.n_trials);

  for (int trial = 0; trial < config.n_trials; ++trial) {
    Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(trial));
    const std::vector<Rigid> trajectory = sample_trajectory(geom, rng);
    const int n_views = rng.uniform_int(config.n_views_min, config.n_views_max);
    const std::vector<int> picked = fps_select(trajectory, n_views);

    std::vector<Rigid> estimated;
    estimated.reserve(picked.size());
    for (int idx : picked) {
      TagDetections det = render_detections(geom.board, trajectory[idx], geom.intrinsics);
      const double sigma = isotropic_sigma(noise.pose_corner_rmse);
      for (TagObservation& tag : det.tags)
        for (Vec2& c : tag.corners) c += Vec2(rng.normal(), rng.normal()) * sigma;
      estimated.push_back(estimate_camera_pose(geom.board, det, geom.intrinsics).pose);
    }

    const Vec3 keypoint(rng.uniform(-0.5, 0.5) * config.workspace_xy,
                        rng.uniform(-0.5, 0.5) * config.workspace_xy,
                        rng.uniform(0.0, 1.0) * config.workspace_height);
    const double annotation_rmse =
        std::max(0.0, rng.normal(noise.annotation_rmse_mean, noise.annotation_rmse_std));
    const double sigma = isotropic_sigma(annotation_rmse);

    std::vector<ViewObservation> views;
    views.reserve(picked.size());
    for (std::size_t i = 0; i < picked.size(); ++i) {
      const Rigid& imaging = config.project_through_true_poses ? trajectory[picked[i]] : estimated[i];
      ViewObservation v;
      v.pose = estimated[i];
      v.intrinsics = geom.intrinsics;
      v.uv = project(geom.intrinsics, imaging.apply(keypoint)) + Vec2(rng.normal(), rng.normal()) * sigma;
      views.push_back(v);
    }

    Keypoint3D kp;
    try {
      kp = triangulate_keypoint(views);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDegenerateRays)
        throw Error(ErrorCode::kDegenerateGeometry, "simulation: selected views are coincident");
      throw;
    }
    out.errors_m[trial] = (kp.position - keypoint).norm();
    out.views_used[trial] = n_views;
  }

  double sum = 0;
  for (double e : out.errors_m) sum += e * e;
  out.rmse_m = std::sqrt(sum / config.n_trials);
  return out;
}

double compare_to_sensor(double rmse_m) {
  if (!(rmse_m > 0)) throw Error(ErrorCode::kInvalidArgument, "compare_to_sensor: rmse must be positive");
  return kDepthSensorErrorM / rmse_m;
}

}  // namespace kplab
