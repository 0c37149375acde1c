#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "kplab/geometry.hpp"

namespace kplab {

using KeypointSet = std::vector<Uvd>;

/// Allowed relabelings of keypoint ids (0-based here; 1-based in files).
/// Each permutation maps position i to source index perm[i].
struct SymmetrySpec {
  std::vector<std::vector<int>> permutations;

  static SymmetrySpec identity(int n);
  int size() const { return permutations.empty() ? 0 : static_cast<int>(permutations.front().size()); }
  /// Throws kInvalidArgument unless every entry is a bijection on 0..n-1 and
  /// the identity is present.
  void validate(int n) const;
  bool operator==(const SymmetrySpec&) const = default;
};

/// out[i] = set[perm[i]].
KeypointSet permute(std::span<const Uvd> set, std::span<const int> perm);

/// Camera a predicted point is re-projected into; `pose` maps the left camera
/// frame to this view.
struct ViewProjection {
  Rigid pose;
  Intrinsics intrinsics;
};

/// Per-keypoint logits and disparity grids (rows = v, cols = u).
struct Heatmaps {
  std::vector<Eigen::MatrixXd> logits;
  std::vector<Eigen::MatrixXd> disparity;
};

struct LossWithGradient {
  double value = 0;
  std::vector<Vec3> gradient;  // d loss / d pred (u, v, d), per keypoint
};

inline constexpr double kMinPredictedDisparity = 1e-3;
inline constexpr double kLocalitySigmaPx = 10.0;

/// Sum of squared UVD differences.
double keypoint_loss(std::span<const Uvd> pred, std::span<const Uvd> gt);
LossWithGradient keypoint_loss_with_gradient(std::span<const Uvd> pred, std::span<const Uvd> gt);

/// Sum over keypoints and views of the squared pixel distance between the
/// re-projections of the predicted and labeled 3D points. Predicted
/// disparities are clamped to kMinPredictedDisparity.
double projection_loss(std::span<const Uvd> pred, std::span<const Uvd> gt, const Rig& rig,
                       std::span<const ViewProjection> views);
LossWithGradient projection_loss_with_gradient(std::span<const Uvd> pred, std::span<const Uvd> gt,
                                               const Rig& rig, std::span<const ViewProjection> views);

/// Softmax over all cells of each grid.
std::vector<Eigen::MatrixXd> spatial_softmax(std::span<const Eigen::MatrixXd> logits);

/// 1 - N / max(N) on the grid, N a circular Gaussian centered on `center`.
Eigen::MatrixXd inverted_gaussian(int rows, int cols, const Vec2& center, double sigma);

/// Sum over keypoints of the probability mass weighted by the inverted
/// Gaussian around the label.
double locality_loss(std::span<const Eigen::MatrixXd> probs, std::span<const Vec2> gt_uv,
                     double sigma = kLocalitySigmaPx);

/// Projection-loss weight: 0 up to t = 1/3, 2.5 from t = 2/3, linear between.
double alpha_schedule(double t);

double total_loss(double kp, double proj, double loc, double t);

struct PermutationMin {
  double value = 0;
  int index = 0;  // into SymmetrySpec::permutations
  std::vector<int> permutation;
};

using SetLoss = std::function<double(std::span<const Uvd>, std::span<const Uvd>)>;

/// Minimum of loss(pred, permute(gt, p)) over the allowed permutations; the
/// first listed permutation wins ties.
PermutationMin permutation_min(const SetLoss& loss, std::span<const Uvd> pred, std::span<const Uvd> gt,
                               const SymmetrySpec& sym);

/// Spatial softmax of each logit grid, then probability-weighted expectation
/// of (u, v) and of the disparity grid.
KeypointSet integral_decode(const Heatmaps& maps);

}  // namespace kplab
