#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace slowlight::detail {

/// Objective with analytic gradient and Hessian; either pointer may be null.
using SmoothObjective =
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*, Eigen::MatrixXd*)>;

struct BoundedProblem {
  SmoothObjective objective;
  Eigen::VectorXd lower;
  /// Strict bounds are never reached (x > lower); the others may be active.
  std::vector<bool> strict;
};

struct OptimizerResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
  std::vector<bool> active;
  int iterations = 0;
  bool converged = false;
};

/// Projected Newton with Levenberg damping. Stops when an undamped step
/// changes the objective by less than tolerance relative to max(1, |F|).
OptimizerResult minimize_bounded(const BoundedProblem& problem, Eigen::VectorXd x0,
                                 double tolerance, int max_iterations);

} // namespace slowlight::detail
