#include "kplab/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kplab {

namespace {

void require_nonempty(std::size_t n, const char* what) {
  if (n == 0) throw Error(ErrorCode::kEmptyInput, std::string(what) + ": no errors to aggregate");
}

}  // namespace

EvalRecord sample_errors(std::span<const Uvd> pred, std::span<const Uvd> gt, const Rig& rig,
                         const SymmetrySpec& sym) {
  if (pred.size() != gt.size())
    throw Error(ErrorCode::kSizeMismatch, "sample_errors: predicted and labeled keypoint counts differ");
  const int n = static_cast<int>(gt.size());
  const SymmetrySpec& perms = sym.permutations.empty() ? SymmetrySpec::identity(n) : sym;
  perms.validate(n);

  std::vector<Vec3> pred_xyz(n), gt_xyz(n);
  for (int i = 0; i < n; ++i) {
    Uvd p = pred[i];
    p.d = std::max(p.d, kMinPredictedDisparity);
    pred_xyz[i] = uvd_to_xyz(rig, p);
    gt_xyz[i] = uvd_to_xyz(rig, gt[i]);
  }

  std::size_t best = 0;
  double best_total = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < perms.permutations.size(); ++k) {
    double total = 0;
    for (int i = 0; i < n; ++i) total += (pred_xyz[i] - gt_xyz[perms.permutations[k][i]]).norm();
    if (total < best_total) {
      best_total = total;
      best = k;
    }
  }

  EvalRecord rec;
  rec.permutation = perms.permutations[best];
  rec.error_3d.resize(n);
  rec.uv_error.resize(n);
  rec.disp_error.resize(n);
  for (int i = 0; i < n; ++i) {
    const int j = rec.permutation[i];
    rec.error_3d[i] = (pred_xyz[i] - gt_xyz[j]).norm();
    rec.uv_error[i] = std::hypot(pred[i].u - gt[j].u, pred[i].v - gt[j].v);
    rec.disp_error[i] = std::abs(pred[i].d - gt[j].d);
  }
  return rec;
}

std::vector<double> pooled_errors(std::span<const EvalRecord> records) {
  std::vector<double> out;
  for (const EvalRecord& r : records) out.insert(out.end(), r.error_3d.begin(), r.error_3d.end());
  return out;
}

double mae(std::span<const double> errors) {
  require_nonempty(errors.size(), "mae");
  double sum = 0;
  for (double e : errors) sum += e;
  return sum / static_cast<double>(errors.size());
}

double pct_under(std::span<const double> errors, double threshold) {
  require_nonempty(errors.size(), "pct_under");
  const auto count = std::count_if(errors.begin(), errors.end(), [&](double e) { return e < threshold; });
  return 100.0 * static_cast<double>(count) / static_cast<double>(errors.size());
}

double auc(std::span<const double> errors, double range) {
  require_nonempty(errors.size(), "auc");
  if (!(range > 0)) throw Error(ErrorCode::kInvalidArgument, "auc: range must be positive");
  double area = 0;
  for (double e : errors) area += std::max(0.0, range - e);
  return 100.0 * area / (range * static_cast<double>(errors.size()));
}

double mae(std::span<const EvalRecord> records) { return mae(pooled_errors(records)); }

double pct_under(std::span<const EvalRecord> records, double threshold) {
  return pct_under(pooled_errors(records), threshold);
}

double auc(std::span<const EvalRecord> records, double range) { return auc(pooled_errors(records), range); }

std::vector<std::pair<double, double>> precision_curve(std::span<const double> errors, double max_threshold,
                                                       int resolution) {
  require_nonempty(errors.size(), "precision_curve");
  if (resolution < 1 || !(max_threshold > 0))
    throw Error(ErrorCode::kInvalidArgument, "precision_curve: resolution and range must be positive");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> curve;
  curve.reserve(resolution + 1);
  for (int i = 0; i <= resolution; ++i) {
    const double t = max_threshold * i / resolution;
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    curve.emplace_back(t, 100.0 * static_cast<double>(below) / static_cast<double>(sorted.size()));
  }
  return curve;
}

MetricsSummary summarize(std::span<const EvalRecord> records) {
  const std::vector<double> errors = pooled_errors(records);
  require_nonempty(errors.size(), "summarize");
  std::vector<double> uv, disp;
  for (const EvalRecord& r : records) {
    uv.insert(uv.end(), r.uv_error.begin(), r.uv_error.end());
    disp.insert(disp.end(), r.disp_error.begin(), r.disp_error.end());
  }
  MetricsSummary s;
  s.auc = auc(errors);
  s.pct_2cm = pct_under(errors);
  s.mae_mm = 1000.0 * mae(errors);
  s.uv_mae_px = mae(uv);
  s.disp_mae_px = mae(disp);
  s.count = static_cast<int>(errors.size());
  return s;
}

}  // namespace kplab
