#pragma once

#include <span>
#include <utility>
#include <vector>

#include "kplab/geometry.hpp"
#include "kplab/losses.hpp"

namespace kplab {

/// Per-keypoint errors of one predicted sample under its best permutation.
struct EvalRecord {
  std::vector<double> error_3d;    // m
  std::vector<double> uv_error;    // px
  std::vector<double> disp_error;  // px
  std::vector<int> permutation;
};

/// Picks the allowed permutation with the smallest total 3D error and reports
/// errors under it. Throws kInvalidDisparity for a non-positive label
/// disparity; predicted disparities are clamped like the projection loss.
EvalRecord sample_errors(std::span<const Uvd> pred, std::span<const Uvd> gt, const Rig& rig,
                         const SymmetrySpec& sym);

/// All per-keypoint 3D errors pooled across records.
std::vector<double> pooled_errors(std::span<const EvalRecord> records);

inline constexpr double kDefaultPctThresholdM = 0.02;
inline constexpr double kDefaultAucRangeM = 0.10;

double mae(std::span<const double> errors);
double mae(std::span<const EvalRecord> records);

/// Percentage of errors strictly below `threshold`.
double pct_under(std::span<const double> errors, double threshold = kDefaultPctThresholdM);
double pct_under(std::span<const EvalRecord> records, double threshold = kDefaultPctThresholdM);

/// Area under the empirical error CDF over [0, range], as a percentage of the
/// full square. Exact for the step CDF: 100 * mean(max(0, range - e)) / range.
double auc(std::span<const double> errors, double range = kDefaultAucRangeM);
double auc(std::span<const EvalRecord> records, double range = kDefaultAucRangeM);

/// (threshold, percent of errors <= threshold) at `resolution` + 1 evenly
/// spaced thresholds on [0, max_threshold].
std::vector<std::pair<double, double>> precision_curve(std::span<const double> errors, double max_threshold,
                                                       int resolution);

struct MetricsSummary {
  double auc = 0;
  double pct_2cm = 0;
  double mae_mm = 0;
  double uv_mae_px = 0;
  double disp_mae_px = 0;
  int count = 0;
};

MetricsSummary summarize(std::span<const EvalRecord> records);

}  // namespace kplab
