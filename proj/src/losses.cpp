#include "kplab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kplab {

SymmetrySpec SymmetrySpec::identity(int n) {
  SymmetrySpec s;
  s.permutations.emplace_back(n);
  for (int i = 0; i < n; ++i) s.permutations[0][i] = i;
  return s;
}

void SymmetrySpec::validate(int n) const {
  bool has_identity = false;
  for (const auto& p : permutations) {
    if (static_cast<int>(p.size()) != n)
      throw Error(ErrorCode::kInvalidArgument, "symmetry: permutation has the wrong length");
    std::vector<bool> seen(n, false);
    bool identity = true;
    for (int i = 0; i < n; ++i) {
      if (p[i] < 0 || p[i] >= n || seen[p[i]])
        throw Error(ErrorCode::kInvalidArgument, "symmetry: permutation is not a bijection");
      seen[p[i]] = true;
      identity = identity && p[i] == i;
    }
    has_identity = has_identity || identity;
  }
  if (!has_identity) throw Error(ErrorCode::kInvalidArgument, "symmetry: identity permutation missing");
}

KeypointSet permute(std::span<const Uvd> set, std::span<const int> perm) {
  if (perm.size() != set.size()) throw Error(ErrorCode::kSizeMismatch, "permute: length mismatch");
  KeypointSet out(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) out[i] = set[perm[i]];
  return out;
}

namespace {

void check_sizes(std::span<const Uvd> pred, std::span<const Uvd> gt) {
  if (pred.size() != gt.size())
    throw Error(ErrorCode::kSizeMismatch, "loss: predicted and labeled keypoint counts differ");
}

Uvd clamp_disparity(Uvd k) {
  k.d = std::max(k.d, kMinPredictedDisparity);
  return k;
}

}  // namespace

double keypoint_loss(std::span<const Uvd> pred, std::span<const Uvd> gt) {
  check_sizes(pred, gt);
  double sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += (pred[i].vec() - gt[i].vec()).squaredNorm();
  return sum;
}

LossWithGradient keypoint_loss_with_gradient(std::span<const Uvd> pred, std::span<const Uvd> gt) {
  check_sizes(pred, gt);
  LossWithGradient out;
  out.gradient.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Vec3 diff = pred[i].vec() - gt[i].vec();
    out.value += diff.squaredNorm();
    out.gradient[i] = 2 * diff;
  }
  return out;
}

LossWithGradient projection_loss_with_gradient(std::span<const Uvd> pred, std::span<const Uvd> gt,
                                               const Rig& rig, std::span<const ViewProjection> views) {
  check_sizes(pred, gt);
  LossWithGradient out;
  out.gradient.assign(pred.size(), Vec3::Zero());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Uvd p = clamp_disparity(pred[i]);
    const Vec3 xp = uvd_to_xyz(rig, p);
    const Vec3 xg = uvd_to_xyz(rig, gt[i]);
    Mat3 dq = uvd_to_xyz_jacobian(rig, p);
    if (pred[i].d < kMinPredictedDisparity) dq.col(2).setZero();
    for (const ViewProjection& view : views) {
      const Vec3 cp = view.pose.apply(xp);
      const Vec2 r = project(view.intrinsics, cp) - project(view.intrinsics, view.pose.apply(xg));
      out.value += r.squaredNorm();
      out.gradient[i] += (2 * r.transpose() * project_jacobian(view.intrinsics, cp) * view.pose.rotation * dq).transpose();
    }
  }
  return out;
}

double projection_loss(std::span<const Uvd> pred, std::span<const Uvd> gt, const Rig& rig,
                       std::span<const ViewProjection> views) {
  check_sizes(pred, gt);
  double sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Vec3 xp = uvd_to_xyz(rig, clamp_disparity(pred[i]));
    const Vec3 xg = uvd_to_xyz(rig, gt[i]);
    for (const ViewProjection& view : views)
      sum += (project(view.intrinsics, view.pose.apply(xp)) - project(view.intrinsics, view.pose.apply(xg)))
                 .squaredNorm();
  }
  return sum;
}

std::vector<Eigen::MatrixXd> spatial_softmax(std::span<const Eigen::MatrixXd> logits) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(logits.size());
  for (const Eigen::MatrixXd& l : logits) {
    Eigen::MatrixXd e = (l.array() - l.maxCoeff()).exp().matrix();
    e /= e.sum();
    out.push_back(std::move(e));
  }
  return out;
}

Eigen::MatrixXd inverted_gaussian(int rows, int cols, const Vec2& center, double sigma) {
  Eigen::MatrixXd n(rows, cols);
  const double inv = 1.0 / (2 * sigma * sigma);
  for (int v = 0; v < rows; ++v)
    for (int u = 0; u < cols; ++u) {
      const double du = u - center.x(), dv = v - center.y();
      n(v, u) = std::exp(-(du * du + dv * dv) * inv);
    }
  const double peak = n.maxCoeff();
  if (!(peak > 0)) return Eigen::MatrixXd::Ones(rows, cols);
  return (1.0 - n.array() / peak).matrix();
}

double locality_loss(std::span<const Eigen::MatrixXd> probs, std::span<const Vec2> gt_uv, double sigma) {
  if (probs.size() != gt_uv.size())
    throw Error(ErrorCode::kSizeMismatch, "locality loss: map and label counts differ");
  double sum = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const Eigen::MatrixXd inv = inverted_gaussian(static_cast<int>(probs[i].rows()),
                                                  static_cast<int>(probs[i].cols()), gt_uv[i], sigma);
    sum += probs[i].cwiseProduct(inv).sum();
  }
  return sum;
}

double alpha_schedule(double t) {
  if (!(t >= 0 && t <= 1)) throw Error(ErrorCode::kOutOfRange, "alpha schedule: t must lie in [0, 1]");
  constexpr double lo = 1.0 / 3.0, hi = 2.0 / 3.0, peak = 2.5;
  if (t <= lo) return 0.0;
  if (t >= hi) return peak;
  return peak * (3.0 * t - 1.0);
}

double total_loss(double kp, double proj, double loc, double t) {
  return kp + alpha_schedule(t) * proj + 0.001 * loc;
}

PermutationMin permutation_min(const SetLoss& loss, std::span<const Uvd> pred, std::span<const Uvd> gt,
                               const SymmetrySpec& sym) {
  check_sizes(pred, gt);
  sym.validate(static_cast<int>(gt.size()));
  PermutationMin best;
  best.value = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < sym.permutations.size(); ++k) {
    const KeypointSet permuted = permute(gt, sym.permutations[k]);
    const double value = loss(pred, permuted);
    if (value < best.value) {
      best.value = value;
      best.index = static_cast<int>(k);
      best.permutation = sym.permutations[k];
    }
  }
  return best;
}

KeypointSet integral_decode(const Heatmaps& maps) {
  if (maps.logits.size() != maps.disparity.size())
    throw Error(ErrorCode::kSizeMismatch, "integral decode: logit and disparity map counts differ");
  const std::vector<Eigen::MatrixXd> probs = spatial_softmax(maps.logits);
  KeypointSet out;
  out.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const Eigen::MatrixXd& p = probs[i];
    if (maps.disparity[i].rows() != p.rows() || maps.disparity[i].cols() != p.cols())
      throw Error(ErrorCode::kSizeMismatch, "integral decode: disparity grid size differs from logits");
    const Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(p.cols(), 0, static_cast<double>(p.cols() - 1));
    const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(p.rows(), 0, static_cast<double>(p.rows() - 1));
    out.push_back({p.colwise().sum().dot(u), p.rowwise().sum().dot(v), p.cwiseProduct(maps.disparity[i]).sum()});
  }
  return out;
}

}  // namespace kplab
