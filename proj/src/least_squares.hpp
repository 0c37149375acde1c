#pragma once

// Small dense Levenberg-Marquardt loop shared by pose estimation and
// triangulation. Internal header.

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace kplab::detail {

struct LmOptions {
  int max_iterations = 100;
  double min_step_norm = 1e-10;
  double min_relative_decrease = 1e-12;
  double initial_lambda = 1e-3;
};

template <typename State>
struct LmResult {
  State state;
  double initial_cost = 0;
  double final_cost = 0;
  int iterations = 0;
  bool converged = false;
};

/// Minimizes 0.5 * |r(x)|^2. `evaluate(x, r, J)` fills the residual and its
/// Jacobian with respect to a local perturbation and returns false when x is
/// infeasible. `retract(x, delta)` applies a perturbation.
template <int P, typename State, typename Evaluate, typename Retract>
LmResult<State> levenberg_marquardt(State x, Evaluate&& evaluate, Retract&& retract,
                                    const LmOptions& opts = {}) {
  using Jacobian = Eigen::Matrix<double, Eigen::Dynamic, P>;
  using Vector = Eigen::Matrix<double, P, 1>;
  using Normal = Eigen::Matrix<double, P, P>;

  LmResult<State> out{x};
  Eigen::VectorXd r;
  Jacobian jac;
  if (!evaluate(x, r, jac)) {
    out.initial_cost = out.final_cost = std::numeric_limits<double>::infinity();
    return out;
  }
  double cost = r.squaredNorm();
  out.initial_cost = cost;
  double lambda = opts.initial_lambda;

  Eigen::VectorXd r_try;
  Jacobian jac_try;
  for (int it = 0; it < opts.max_iterations; ++it) {
    out.iterations = it + 1;
    if (cost == 0.0) {
      out.converged = true;
      break;
    }
    const Normal a = jac.transpose() * jac;
    const Vector g = jac.transpose() * r;
    bool accepted = false;
    bool stop = false;
    while (lambda < 1e16) {
      Normal damped = a;
      for (int i = 0; i < P; ++i) damped(i, i) += lambda * std::max(a(i, i), 1e-12);
      const Vector delta = damped.ldlt().solve(-g);
      if (!delta.allFinite()) {
        lambda *= 10;
        continue;
      }
      State candidate = retract(x, delta);
      if (evaluate(candidate, r_try, jac_try)) {
        const double new_cost = r_try.squaredNorm();
        if (new_cost < cost) {
          const double rel = (cost - new_cost) / cost;
          x = std::move(candidate);
          r.swap(r_try);
          jac.swap(jac_try);
          cost = new_cost;
          lambda = std::max(lambda * 0.1, 1e-12);
          accepted = true;
          stop = delta.norm() < opts.min_step_norm || rel < opts.min_relative_decrease;
          break;
        }
      }
      lambda *= 10;
    }
    if (!accepted || stop) {
      out.converged = true;
      break;
    }
  }
  out.state = std::move(x);
  out.final_cost = cost;
  return out;
}

}  // namespace kplab::detail
