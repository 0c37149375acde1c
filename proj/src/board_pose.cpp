#include "kplab/board_pose.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>

#include "least_squares.hpp"

namespace kplab {

FiducialBoard FiducialBoard::perimeter(double board_size, double tag_size) {
  FiducialBoard board;
  const double h = 0.5 * tag_size;
  const double e = 0.5 * (board_size - tag_size);
  const std::array<Vec2, 8> centers = {Vec2(-e, -e), Vec2(0, -e), Vec2(e, -e), Vec2(e, 0),
                                       Vec2(e, e),   Vec2(0, e),  Vec2(-e, e), Vec2(-e, 0)};
  for (int id = 0; id < 8; ++id) {
    const Vec2& c = centers[id];
    board.tags[id] = {Vec3(c.x() - h, c.y() - h, 0), Vec3(c.x() + h, c.y() - h, 0),
                      Vec3(c.x() + h, c.y() + h, 0), Vec3(c.x() - h, c.y() + h, 0)};
  }
  return board;
}

void FiducialBoard::validate() const {
  if (tags.size() < 4) throw Error(ErrorCode::kInvalidArgument, "board: at least 4 tags required");
  for (const auto& [id, corners] : tags) {
    for (const Vec3& c : corners) {
      if (!c.allFinite() || std::abs(c.z()) > 1e-12)
        throw Error(ErrorCode::kInvalidArgument,
                    "board: tag " + std::to_string(id) + " corner is not on the z=0 plane");
    }
    // Signed area of the quad, positive for counter-clockwise order.
    double area = 0;
    for (int i = 0; i < 4; ++i) {
      const Vec3& a = corners[i];
      const Vec3& b = corners[(i + 1) % 4];
      area += a.x() * b.y() - b.x() * a.y();
    }
    if (!(area > 0))
      throw Error(ErrorCode::kInvalidArgument,
                  "board: tag " + std::to_string(id) + " corners are not counter-clockwise");
  }
}

TagDetections render_detections(const FiducialBoard& board, const Rigid& world_to_camera,
                                const Intrinsics& intr, const std::string& frame_id) {
  TagDetections det;
  det.frame_id = frame_id;
  for (const auto& [id, corners] : board.tags) {
    TagObservation obs;
    obs.tag_id = id;
    bool visible = true;
    for (int i = 0; i < 4 && visible; ++i) {
      const Vec3 pc = world_to_camera.apply(corners[i]);
      if (pc.z() <= 1e-6) {
        visible = false;
        break;
      }
      obs.corners[i] = project(intr, pc);
      const Vec2& uv = obs.corners[i];
      visible = uv.x() >= -0.5 && uv.y() >= -0.5 && uv.x() <= intr.width - 0.5 &&
                uv.y() <= intr.height - 0.5;
    }
    if (visible) det.tags.push_back(obs);
  }
  return det;
}

namespace {

struct Correspondences {
  std::vector<Vec3> world;
  std::vector<Vec2> pixels;
};

Correspondences gather(const FiducialBoard& board, const TagDetections& det) {
  Correspondences c;
  for (const TagObservation& obs : det.tags) {
    auto it = board.tags.find(obs.tag_id);
    if (it == board.tags.end())
      throw Error(ErrorCode::kInvalidArgument,
                  "detections: tag id " + std::to_string(obs.tag_id) + " is not on the board");
    for (int i = 0; i < 4; ++i) {
      c.world.push_back(it->second[i]);
      c.pixels.push_back(obs.corners[i]);
    }
  }
  return c;
}

// Similarity transform that centers points and scales mean distance to sqrt(2).
Mat3 normalizing_transform(const std::vector<Vec2>& pts) {
  Vec2 mean = Vec2::Zero();
  for (const Vec2& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double dist = 0;
  for (const Vec2& p : pts) dist += (p - mean).norm();
  dist /= static_cast<double>(pts.size());
  const double s = dist > 0 ? std::sqrt(2.0) / dist : 1.0;
  Mat3 t;
  t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return t;
}

// Homography mapping board (x, y) to normalized image coordinates.
Mat3 fit_homography(const std::vector<Vec2>& src, const std::vector<Vec2>& dst) {
  const Mat3 ts = normalizing_transform(src);
  const Mat3 td = normalizing_transform(dst);
  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::MatrixXd a(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 s = ts * src[i].homogeneous();
    const Vec3 d = td * dst[i].homogeneous();
    a.row(2 * i) << -s.x(), -s.y(), -1, 0, 0, 0, d.x() * s.x(), d.x() * s.y(), d.x();
    a.row(2 * i + 1) << 0, 0, 0, -s.x(), -s.y(), -1, d.y() * s.x(), d.y() * s.y(), d.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return td.inverse() * hn * ts;
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1 : 1;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

// H ~ [r1 r2 t]. Of the two sign choices, keep the one that puts the board
// origin in front of the camera.
Rigid decompose_homography(const Mat3& h) {
  const double scale = 2.0 / (h.col(0).norm() + h.col(1).norm());
  Mat3 m = h * scale;
  if (m(2, 2) < 0) m = -m;
  Mat3 r;
  r.col(0) = m.col(0);
  r.col(1) = m.col(1);
  r.col(2) = m.col(0).cross(m.col(1));
  return {nearest_rotation(r), m.col(2)};
}

}  // namespace

double corner_rmse(const FiducialBoard& board, const TagDetections& detections,
                   const Intrinsics& intr, const Rigid& world_to_camera) {
  const Correspondences c = gather(board, detections);
  if (c.world.empty()) return 0;
  double sum = 0;
  for (std::size_t i = 0; i < c.world.size(); ++i)
    sum += (project(intr, world_to_camera.apply(c.world[i])) - c.pixels[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(c.world.size()));
}

PoseEstimate estimate_camera_pose(const FiducialBoard& board, const TagDetections& detections,
                                  const Intrinsics& intr) {
  if (detections.tags.size() < 3)
    throw Error(ErrorCode::kTooFewTags,
                "pose estimation: fewer than 3 tags detected in frame '" + detections.frame_id + "'");
  const Correspondences c = gather(board, detections);

  std::vector<Vec2> plane(c.world.size()), normalized(c.world.size());
  for (std::size_t i = 0; i < c.world.size(); ++i) {
    plane[i] = c.world[i].head<2>();
    normalized[i] = unproject(intr, c.pixels[i]).head<2>();
  }
  const Rigid init = decompose_homography(fit_homography(plane, normalized));

  const auto n = static_cast<Eigen::Index>(c.world.size());
  auto evaluate = [&](const Rigid& pose, Eigen::VectorXd& r, Eigen::Matrix<double, Eigen::Dynamic, 6>& jac) {
    r.resize(2 * n);
    jac.resize(2 * n, 6);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3 rotated = pose.rotation * c.world[i];
      const Vec3 pc = rotated + pose.translation;
      if (!(pc.z() > 1e-9)) return false;
      r.segment<2>(2 * i) = project(intr, pc) - c.pixels[i];
      const Eigen::Matrix<double, 2, 3> jp = project_jacobian(intr, pc);
      jac.block<2, 3>(2 * i, 0) = -jp * Rigid::skew(rotated);
      jac.block<2, 3>(2 * i, 3) = jp;
    }
    return r.allFinite();
  };
  auto retract = [](const Rigid& pose, const Eigen::Matrix<double, 6, 1>& delta) {
    return Rigid(Rigid::exp_so3(delta.head<3>()) * pose.rotation, pose.translation + delta.tail<3>());
  };

  const auto result = detail::levenberg_marquardt<6>(init, evaluate, retract);
  if (!std::isfinite(result.final_cost) || !result.state.is_valid(1e-6))
    throw Error(ErrorCode::kSolverDiverged,
                "pose estimation: solver did not reduce the residual for frame '" +
                    detections.frame_id + "'");

  PoseEstimate est;
  est.pose = result.state;
  est.pose.rotation = nearest_rotation(est.pose.rotation);
  est.rmse = corner_rmse(board, detections, intr, est.pose);
  est.n_tags = static_cast<int>(detections.tags.size());
  return est;
}

TrajectoryPoseStats trajectory_pose_stats(std::span<const PoseEstimate> estimates) {
  if (estimates.empty()) throw Error(ErrorCode::kEmptyInput, "trajectory statistics: no pose estimates");
  const double n = static_cast<double>(estimates.size());
  TrajectoryPoseStats s;
  for (const PoseEstimate& e : estimates) {
    s.mean_rmse += e.rmse;
    s.mean_tags += e.n_tags;
  }
  s.mean_rmse /= n;
  s.mean_tags /= n;
  double var = 0;
  for (const PoseEstimate& e : estimates) var += (e.rmse - s.mean_rmse) * (e.rmse - s.mean_rmse);
  s.std_rmse = std::sqrt(var / n);
  return s;
}

}  // namespace kplab
