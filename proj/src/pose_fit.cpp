#include "kplab/pose_fit.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace kplab {

namespace {

constexpr double kRankTolerance = 1e-9;

struct Alignment {
  Rigid transform;
  double rmsd = 0;
  bool degenerate = false;
};

Alignment align(std::span<const Vec3> model, std::span<const Vec3> observed, std::span<const int> perm) {
  const std::size_t n = observed.size();
  Vec3 mc = Vec3::Zero(), oc = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mc += model[perm[i]];
    oc += observed[i];
  }
  mc /= static_cast<double>(n);
  oc /= static_cast<double>(n);

  Mat3 cov = Mat3::Zero();
  double spread = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 a = model[perm[i]] - mc, b = observed[i] - oc;
    cov += a * b.transpose();
    spread += a.squaredNorm() + b.squaredNorm();
  }

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d s = svd.singularValues();
  Alignment out;
  Mat3 r = Mat3::Identity();
  if (!(s(0) > 1e-15 * spread) || spread == 0) {
    out.degenerate = true;
  } else if (s(1) < kRankTolerance * s(0)) {
    // Rank one: only the axis is determined. Shortest-arc rotation taking
    // the model axis onto the observed one is the closest to identity.
    out.degenerate = true;
    r = Eigen::Quaterniond::FromTwoVectors(svd.matrixU().col(0), svd.matrixV().col(0)).toRotationMatrix();
  } else {
    const Mat3 u = svd.matrixU(), v = svd.matrixV();
    Mat3 d = Mat3::Identity();
    if ((v * u.transpose()).determinant() < 0) d(2, 2) = -1;
    r = v * d * u.transpose();
  }
  out.transform = Rigid(r, oc - r * mc);

  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) sum += (out.transform.apply(model[perm[i]]) - observed[i]).squaredNorm();
  out.rmsd = std::sqrt(sum / static_cast<double>(n));
  return out;
}

}  // namespace

ProcrustesResult procrustes_align(const KeypointModel& model, std::span<const Vec3> observed) {
  if (model.points.empty()) throw Error(ErrorCode::kEmptyInput, "procrustes: model has no keypoints");
  if (model.points.size() != observed.size())
    throw Error(ErrorCode::kSizeMismatch, "procrustes: model and observed keypoint counts differ");
  const int n = static_cast<int>(observed.size());
  const SymmetrySpec sym = model.sym.permutations.empty() ? SymmetrySpec::identity(n) : model.sym;
  sym.validate(n);

  ProcrustesResult best;
  best.rmsd = std::numeric_limits<double>::infinity();
  for (const std::vector<int>& perm : sym.permutations) {
    const Alignment a = align(model.points, observed, perm);
    if (a.rmsd < best.rmsd) {
      best.transform = a.transform;
      best.rmsd = a.rmsd;
      best.degenerate = a.degenerate;
      best.permutation = perm;
    }
  }
  return best;
}

}  // namespace kplab
