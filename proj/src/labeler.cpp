#include "kplab/labeler.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>

#include "least_squares.hpp"

namespace kplab {

std::vector<int> fps_select(std::span<const Rigid> world_to_camera, int k) {
  const int n = static_cast<int>(world_to_camera.size());
  if (k < 1 || k > n)
    throw Error(ErrorCode::kOutOfRange, "fps_select: k=" + std::to_string(k) + " outside [1, " +
                                            std::to_string(n) + "]");
  std::vector<Vec3> centers(n);
  Vec3 centroid = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    centers[i] = world_to_camera[i].center();
    centroid += centers[i];
  }
  centroid /= n;

  std::vector<int> picked;
  picked.reserve(k);
  int seed = 0;
  double best = -1;
  for (int i = 0; i < n; ++i) {
    const double d = (centers[i] - centroid).norm();
    if (d > best) {
      best = d;
      seed = i;
    }
  }
  picked.push_back(seed);

  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  taken[seed] = true;
  while (static_cast<int>(picked.size()) < k) {
    const Vec3& last = centers[picked.back()];
    int next = -1;
    double far = -1;
    for (int i = 0; i < n; ++i) {
      min_dist[i] = std::min(min_dist[i], (centers[i] - last).norm());
      if (!taken[i] && min_dist[i] > far) {
        far = min_dist[i];
        next = i;
      }
    }
    taken[next] = true;
    picked.push_back(next);
  }
  return picked;
}

namespace {

Vec3 world_ray(const ViewObservation& v) {
  return (v.pose.rotation.transpose() * unproject(v.intrinsics, v.uv)).normalized();
}

Vec3 linear_triangulation(const ViewObservation& a, const ViewObservation& b) {
  Eigen::Matrix4d m;
  int row = 0;
  for (const ViewObservation* v : {&a, &b}) {
    const Vec3 ray = unproject(v->intrinsics, v->uv);
    Eigen::Matrix<double, 3, 4> p;
    p.leftCols<3>() = v->pose.rotation;
    p.col(3) = v->pose.translation;
    m.row(row++) = ray.x() * p.row(2) - p.row(0);
    m.row(row++) = ray.y() * p.row(2) - p.row(1);
  }
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(m, Eigen::ComputeFullV);
  const Eigen::Vector4d x = svd.matrixV().col(3);
  return x.head<3>() / x(3);
}

}  // namespace

double max_ray_angle(std::span<const ViewObservation> views) {
  std::vector<Vec3> rays;
  rays.reserve(views.size());
  for (const ViewObservation& v : views) rays.push_back(world_ray(v));
  double best = 0;
  for (std::size_t i = 0; i < rays.size(); ++i)
    for (std::size_t j = i + 1; j < rays.size(); ++j)
      best = std::max(best, std::atan2(rays[i].cross(rays[j]).norm(), rays[i].dot(rays[j])));
  return best;
}

std::vector<double> reprojection_residuals(const Vec3& position, std::span<const ViewObservation> views) {
  std::vector<double> out;
  out.reserve(views.size());
  for (const ViewObservation& v : views) {
    const Vec3 pc = v.pose.apply(position);
    out.push_back(pc.z() > 0 ? (project(v.intrinsics, pc) - v.uv).norm()
                             : std::numeric_limits<double>::infinity());
  }
  return out;
}

Keypoint3D triangulate_keypoint(std::span<const ViewObservation> views, int keypoint_id) {
  if (views.size() < 2)
    throw Error(ErrorCode::kTooFewViews, "triangulation: keypoint " + std::to_string(keypoint_id) +
                                             " has fewer than 2 views");
  std::vector<Vec3> rays;
  rays.reserve(views.size());
  for (const ViewObservation& v : views) rays.push_back(world_ray(v));
  std::size_t ia = 0, ib = 1;
  double widest = -1;
  for (std::size_t i = 0; i < rays.size(); ++i) {
    for (std::size_t j = i + 1; j < rays.size(); ++j) {
      const double angle = std::atan2(rays[i].cross(rays[j]).norm(), rays[i].dot(rays[j]));
      if (angle > widest) {
        widest = angle;
        ia = i;
        ib = j;
      }
    }
  }
  if (widest < 0.1 * std::numbers::pi / 180.0)
    throw Error(ErrorCode::kDegenerateRays, "triangulation: keypoint " + std::to_string(keypoint_id) +
                                                " has near-parallel rays");

  const Vec3 init = linear_triangulation(views[ia], views[ib]);
  const auto n = static_cast<Eigen::Index>(views.size());
  auto evaluate = [&](const Vec3& x, Eigen::VectorXd& r, Eigen::Matrix<double, Eigen::Dynamic, 3>& jac) {
    r.resize(2 * n);
    jac.resize(2 * n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const ViewObservation& v = views[i];
      const Vec3 pc = v.pose.apply(x);
      if (!(pc.z() > 1e-9)) return false;
      r.segment<2>(2 * i) = project(v.intrinsics, pc) - v.uv;
      jac.block<2, 3>(2 * i, 0) = project_jacobian(v.intrinsics, pc) * v.pose.rotation;
    }
    return r.allFinite();
  };
  auto retract = [](const Vec3& x, const Vec3& delta) -> Vec3 { return x + delta; };
  const auto result = detail::levenberg_marquardt<3>(init, evaluate, retract);
  if (!std::isfinite(result.final_cost))
    throw Error(ErrorCode::kDegenerateRays, "triangulation: keypoint " + std::to_string(keypoint_id) +
                                                " lies behind an annotated view");

  Keypoint3D kp;
  kp.keypoint_id = keypoint_id;
  kp.position = result.state;
  kp.n_views = static_cast<int>(views.size());
  double sum = 0;
  for (double e : reprojection_residuals(kp.position, views)) sum += e * e;
  kp.rmse = std::sqrt(sum / static_cast<double>(views.size()));
  return kp;
}

std::vector<FrameLabels> propagate_labels(std::span<const Keypoint3D> keypoints,
                                          std::span<const StereoFrame> frames) {
  std::vector<FrameLabels> out;
  out.reserve(frames.size());
  for (const StereoFrame& f : frames) {
    FrameLabels labels;
    labels.uvd.reserve(keypoints.size());
    for (const Keypoint3D& kp : keypoints) {
      const Vec3 pc = f.pose.apply(kp.position);
      if (pc.z() > 0) {
        labels.uvd.push_back(xyz_to_uvd(f.rig, pc));
        labels.in_front.push_back(true);
      } else {
        labels.uvd.push_back(Uvd{});
        labels.in_front.push_back(false);
        labels.flagged = true;
      }
    }
    out.push_back(std::move(labels));
  }
  return out;
}

QaResult qa_gate(std::span<const Keypoint3D> keypoints, double threshold_px) {
  if (keypoints.empty()) throw Error(ErrorCode::kEmptyInput, "qa: no keypoints");
  QaResult qa;
  qa.worst_keypoint = keypoints.front().keypoint_id;
  qa.worst_rmse = keypoints.front().rmse;
  for (const Keypoint3D& kp : keypoints) {
    if (kp.rmse > qa.worst_rmse) {
      qa.worst_rmse = kp.rmse;
      qa.worst_keypoint = kp.keypoint_id;
    }
  }
  qa.accept = !(qa.worst_rmse > threshold_px);
  return qa;
}

}  // namespace kplab
