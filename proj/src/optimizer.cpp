#include "optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace slowlight::detail {

namespace {

std::vector<bool> active_set(const BoundedProblem& p, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& g) {
  std::vector<bool> active(x.size(), false);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    active[i] = !p.strict[i] && x[i] <= p.lower[i] && g[i] > 0.0;
  }
  return active;
}

} // namespace

OptimizerResult minimize_bounded(const BoundedProblem& problem, Eigen::VectorXd x0,
                                 double tolerance, int max_iterations) {
  const Eigen::Index n = x0.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!problem.strict[i]) {
      x0[i] = std::max(x0[i], problem.lower[i]);
    }
  }
  OptimizerResult r;
  r.x = x0;
  r.value = problem.objective(r.x, &r.gradient, &r.hessian);
  double damping = 0.0;

  for (r.iterations = 1; r.iterations <= max_iterations; ++r.iterations) {
    r.active = active_set(problem, r.x, r.gradient);
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!r.active[i]) {
        free.push_back(i);
      }
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    if (nf == 0) {
      r.converged = true;
      break;
    }
    Eigen::MatrixXd h(nf, nf);
    Eigen::VectorXd g(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      g[a] = r.gradient[free[a]];
      for (Eigen::Index b = 0; b < nf; ++b) {
        h(a, b) = r.hessian(free[a], free[b]);
      }
    }
    const Eigen::VectorXd scale = h.diagonal().cwiseAbs().cwiseMax(1e-300);

    // Newton decrement: the predicted distance to the minimum of the local
    // quadratic. Once it is below tolerance, further steps are roundoff.
    {
      Eigen::LLT<Eigen::MatrixXd> llt(h);
      if (llt.info() == Eigen::Success &&
          0.5 * g.dot(llt.solve(g)) <= tolerance * std::max(1.0, std::abs(r.value))) {
        r.converged = true;
        break;
      }
    }

    bool accepted = false;
    bool newton_step = false;
    Eigen::VectorXd x_new;
    double f_new = 0.0;
    for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
      Eigen::MatrixXd m = h;
      m.diagonal() += damping * scale;
      Eigen::LLT<Eigen::MatrixXd> llt(m);
      if (llt.info() != Eigen::Success) {
        damping = damping == 0.0 ? 1e-8 : damping * 10.0;
        continue;
      }
      const Eigen::VectorXd d = llt.solve(-g);
      const double slope = g.dot(d);
      double alpha = 1.0;
      for (int halving = 0; halving < 40; ++halving, alpha *= 0.5) {
        x_new = r.x;
        bool feasible = true;
        for (Eigen::Index a = 0; a < nf; ++a) {
          const Eigen::Index i = free[a];
          x_new[i] += alpha * d[a];
          if (problem.strict[i]) {
            feasible = feasible && x_new[i] > problem.lower[i];
          } else {
            x_new[i] = std::max(x_new[i], problem.lower[i]);
          }
        }
        if (!feasible) {
          continue;
        }
        f_new = problem.objective(x_new, nullptr, nullptr);
        if (std::isfinite(f_new) && f_new <= r.value + 1e-4 * alpha * slope) {
          accepted = true;
          newton_step = damping == 0.0 && alpha == 1.0;
          break;
        }
      }
      if (!accepted) {
        damping = damping == 0.0 ? 1e-4 : damping * 10.0;
        if (damping > 1e12) {
          break;
        }
      }
    }
    if (!accepted) {
      // No descent is possible: the iterate is stationary to working precision.
      r.converged = true;
      break;
    }
    const double change = (r.value - f_new) / std::max(1.0, std::abs(f_new));
    r.x = x_new;
    r.value = problem.objective(r.x, &r.gradient, &r.hessian);
    damping = damping < 1e-8 ? 0.0 : damping * 0.1;
    if (newton_step && change < tolerance) {
      r.converged = true;
      break;
    }
  }
  r.iterations = std::min(r.iterations, max_iterations);
  r.active = active_set(problem, r.x, r.gradient);
  return r;
}

} // namespace slowlight::detail
