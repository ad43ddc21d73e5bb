#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "panelqboot/errors.hpp"
#include "panelqboot/feqr.hpp"
#include "panelqboot/loss.hpp"

namespace panelqboot {

namespace detail {

// Exact minimizer by enumeration of basic solutions: the check-loss LP
// attains its optimum at a parameter vector that interpolates p+N
// observations, so trying every nonsingular subset finds a global minimum.
// Cost grows combinatorially; callers must enforce the size guards.
inline QrLpSolution brute_force_lp(const PanelRows& rows, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    fail(errc::invalid_argument, "tau must be in (0,1)");
  }
  const Eigen::Index n = rows.n();
  const int m = static_cast<int>(rows.p()) + rows.n_units;
  if (n < m) fail(errc::singular_design, "fewer observations than parameters");

  Eigen::MatrixXd sub(m, m);
  Eigen::VectorXd ysub(m);
  Eigen::VectorXd best_theta;
  double best_obj = std::numeric_limits<double>::infinity();
  bool found = false;

  std::vector<int> idx(m);
  for (int j = 0; j < m; ++j) idx[j] = j;

  auto evaluate = [&]() {
    for (int j = 0; j < m; ++j) {
      const Eigen::Index k = idx[j];
      sub.row(j).head(rows.p()) = rows.x.row(k);
      sub.row(j).tail(rows.n_units).setZero();
      sub(j, rows.p() + rows.unit[k]) = rows.ind[k];
      ysub[j] = rows.y[k];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) return;
    const Eigen::VectorXd theta = lu.solve(ysub);
    double obj = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      double fitted = rows.ind[k] * theta[rows.p() + rows.unit[k]];
      if (rows.p() > 0) fitted += rows.x.row(k).dot(theta.head(rows.p()));
      obj += check_loss(rows.y[k] - fitted, tau);
    }
    const double tie_eps = 1e-12 * (1.0 + std::abs(best_obj));
    if (!found || obj < best_obj - tie_eps) {
      best_obj = obj;
      best_theta = theta;
      found = true;
    } else if (std::abs(obj - best_obj) <= tie_eps) {
      // Tie on objective: keep the lexicographically smallest parameters.
      for (int j = 0; j < m; ++j) {
        if (theta[j] < best_theta[j]) {
          best_theta = theta;
          best_obj = std::min(best_obj, obj);
          break;
        }
        if (theta[j] > best_theta[j]) break;
      }
    }
  };

  // Iterative subset enumeration in lexicographic order.
  while (true) {
    evaluate();
    int j = m - 1;
    while (j >= 0 && idx[j] == static_cast<int>(n) - m + j) --j;
    if (j < 0) break;
    ++idx[j];
    for (int k = j + 1; k < m; ++k) idx[k] = idx[k - 1] + 1;
  }
  if (!found) {
    fail(errc::singular_design, "no nonsingular observation subset exists");
  }
  QrLpSolution sol;
  sol.theta = best_theta;
  sol.rel_gap = 0.0;
  sol.iterations = 0;
  sol.converged = true;
  return sol;
}

}  // namespace detail

// Enumeration oracle for small instances; guards: p+N <= 12 and N*T <= 40.
inline QuantileFit brute_force_fit(const PanelDataset& data, double tau) {
  const int N = data.n_units();
  const int T = data.n_periods();
  const int p = data.n_covariates();
  if (p + N > 12 || static_cast<std::int64_t>(N) * T > 40) {
    fail(errc::too_large,
         "brute_force_fit requires p+N <= 12 and N*T <= 40, got p+N=" +
             std::to_string(p + N) + ", N*T=" + std::to_string(N * T));
  }
  detail::PanelRows rows = detail::build_rows(data, nullptr, nullptr);
  detail::QrLpSolution sol = detail::brute_force_lp(rows, tau);

  QuantileFit fit;
  fit.tau = tau;
  fit.beta = sol.theta.head(p);
  fit.alpha = sol.theta.tail(N);
  fit.iterations = 0;
  fit.duality_gap = 0.0;
  fit.residuals.resize(N, T);
  fit.objective = 0.0;
  for (int i = 0; i < N; ++i) {
    for (int t = 0; t < T; ++t) {
      const double u =
          data.y(i, t) - data.x_row(i, t).dot(fit.beta) - fit.alpha[i];
      fit.residuals(i, t) = u;
      fit.objective += check_loss(u, tau);
    }
  }
  return fit;
}

}  // namespace panelqboot
