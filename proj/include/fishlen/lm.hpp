#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <functional>

#include "fishlen/error.hpp"

namespace fishlen {

struct LmOptions {
  int max_iterations = 100;
  double initial_lambda = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 0.1;
  double cost_tolerance = 1e-14;  // relative cost decrease
  double step_tolerance = 1e-14;  // relative parameter step
};

struct LmResult {
  Eigen::VectorXd x;
  double cost = 0.0;  // 0.5 * ||r||^2
  int iterations = 0;
  bool converged = false;
};

/// Dense Levenberg-Marquardt with a numeric (central-difference) Jacobian.
/// `residual` maps parameters to the stacked residual vector.
inline LmResult lm_minimize(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual,
    Eigen::VectorXd x0, const LmOptions& opts = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;

  const auto cost_of = [](const VectorXd& r) { return 0.5 * r.squaredNorm(); };

  VectorXd x = std::move(x0);
  VectorXd r = residual(x);
  double cost = cost_of(r);
  double lambda = opts.initial_lambda;

  LmResult result;
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(r.size());
  MatrixXd jac(m, n);

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    result.iterations = iter + 1;

    for (int j = 0; j < n; ++j) {
      const double step = 1e-6 * std::max(1.0, std::abs(x[j]));
      VectorXd xp = x, xm = x;
      xp[j] += step;
      xm[j] -= step;
      jac.col(j) = (residual(xp) - residual(xm)) / (2.0 * step);
    }

    const MatrixXd jtj = jac.transpose() * jac;
    const VectorXd jtr = jac.transpose() * r;

    bool stepped = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      MatrixXd a = jtj;
      for (int j = 0; j < n; ++j) a(j, j) += lambda * std::max(jtj(j, j), 1e-12);
      const VectorXd dx = a.ldlt().solve(-jtr);
      if (!dx.allFinite()) {
        lambda *= opts.lambda_up;
        continue;
      }
      const VectorXd x_new = x + dx;
      const VectorXd r_new = residual(x_new);
      const double cost_new = cost_of(r_new);
      if (cost_new < cost) {
        const double rel_decrease = (cost - cost_new) / std::max(cost, 1e-300);
        const double rel_step = dx.norm() / std::max(1.0, x.norm());
        x = x_new;
        r = r_new;
        cost = cost_new;
        lambda = std::max(lambda * opts.lambda_down, 1e-12);
        stepped = true;
        if (rel_decrease < opts.cost_tolerance || rel_step < opts.step_tolerance)
          result.converged = true;
        break;
      }
      lambda *= opts.lambda_up;
    }

    if (!stepped) {  // no downhill step found at any damping
      result.converged = true;
      break;
    }
    if (result.converged) break;
  }

  result.x = std::move(x);
  result.cost = cost;
  return result;
}

}  // namespace fishlen
