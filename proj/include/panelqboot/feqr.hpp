#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "panelqboot/errors.hpp"
#include "panelqboot/loss.hpp"
#include "panelqboot/panel_data.hpp"

namespace panelqboot {

struct SolverOptions {
  double tol = 1e-8;  // relative duality gap at exit
  int max_iter = 50;
  // Optional nonnegative per-observation weights, flat (N*T) in the same row
  // order as PanelDataset::x(). Zero-weight rows are dropped before solving.
  std::optional<Eigen::VectorXd> obs_weights;
};

struct QuantileFit {
  double tau = 0.5;
  Eigen::VectorXd beta;       // p slopes
  Eigen::VectorXd alpha;      // N individual effects
  Eigen::MatrixXd residuals;  // N x T, u_hat(i,t) = y - x'beta - alpha_i
  double objective = 0.0;     // total (weighted) check loss
  int iterations = 0;
  double duality_gap = 0.0;  // relative gap at exit

  Eigen::VectorXd residuals_flat() const {
    const auto n = residuals.rows() * residuals.cols();
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < residuals.rows(); ++i) {
      for (Eigen::Index t = 0; t < residuals.cols(); ++t) {
        out[i * residuals.cols() + t] = residuals(i, t);
      }
    }
    return out;
  }
};

namespace detail {

// Row-level view of the augmented quantile regression problem
//   min over (beta, alpha)  sum_k rho_tau(y_k - x_k'beta - ind_k*alpha[unit_k])
// Per-observation weights are folded in by row scaling (rho_tau is positively
// homogeneous), which is why ind_k need not be 1.
struct PanelRows {
  Eigen::MatrixXd x;          // n x p (p may be 0)
  Eigen::VectorXd ind;        // n, coefficient on the unit effect
  Eigen::VectorXd y;          // n
  std::vector<int32_t> unit;  // n, unit of each row
  int n_units = 0;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return x.cols(); }
};

struct QrLpSolution {
  Eigen::VectorXd theta;  // (p + N)
  double rel_gap = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Normal-equation solver for the arrowhead matrix A D A' where A stacks the
// p dense covariate columns and N unit-indicator columns. The unit block is
// diagonal, so the system reduces to a p x p Schur complement plus back
// substitution: O(n p^2 + N) per solve instead of O((p+N)^3).
class ArrowheadSolver {
 public:
  explicit ArrowheadSolver(const PanelRows& rows) : rows_(rows) {
    const auto p = rows.p();
    bb_.resize(p, p);
    border_.resize(p, rows.n_units);
    diag_.resize(rows.n_units);
    schur_.resize(p, p);
  }

  // d must be strictly positive elementwise.
  void factorize(const Eigen::VectorXd& d) {
    const auto p = rows_.p();
    const auto n = rows_.n();
    diag_.setZero();
    border_.setZero();
    for (Eigen::Index k = 0; k < n; ++k) {
      const int i = rows_.unit[k];
      const double di = d[k] * rows_.ind[k];
      diag_[i] += di * rows_.ind[k];
      if (p > 0) border_.col(i) += di * rows_.x.row(k).transpose();
    }
    const double diag_max = diag_.maxCoeff();
    if (!(diag_.minCoeff() > 0.0) || !std::isfinite(diag_max)) {
      fail(errc::singular_design,
           "a unit has no effective observations in the weighted design");
    }
    if (p > 0) {
      bb_.noalias() = rows_.x.transpose() * d.asDiagonal() * rows_.x;
      schur_ = bb_;
      for (int i = 0; i < rows_.n_units; ++i) {
        schur_.noalias() -=
            (border_.col(i) / diag_[i]) * border_.col(i).transpose();
      }
      ldlt_.compute(schur_);
      if (ldlt_.info() != Eigen::Success) {
        fail(errc::singular_design, "Schur complement factorization failed");
      }
    }
  }

  // Checks conditioning of the current factorization; used once with d = 1 to
  // reject designs that are collinear after partialling out unit effects.
  void require_full_rank() const {
    if (rows_.p() == 0) return;
    const auto& dvec = ldlt_.vectorD();
    const double dmax = dvec.cwiseAbs().maxCoeff();
    if (!(dvec.minCoeff() > dmax * 1e-12)) {
      fail(errc::singular_design,
           "design is collinear after appending unit indicators");
    }
  }

  // Solves (A D A') [dbeta; dalpha] = [rb; ra].
  void solve(const Eigen::VectorXd& rb, const Eigen::VectorXd& ra,
             Eigen::VectorXd& out) const {
    const auto p = rows_.p();
    out.resize(p + rows_.n_units);
    if (p > 0) {
      Eigen::VectorXd rs = rb;
      for (int i = 0; i < rows_.n_units; ++i) {
        rs.noalias() -= border_.col(i) * (ra[i] / diag_[i]);
      }
      out.head(p) = ldlt_.solve(rs);
      for (int i = 0; i < rows_.n_units; ++i) {
        out[p + i] = (ra[i] - border_.col(i).dot(out.head(p))) / diag_[i];
      }
    } else {
      for (int i = 0; i < rows_.n_units; ++i) out[i] = ra[i] / diag_[i];
    }
  }

 private:
  const PanelRows& rows_;
  Eigen::MatrixXd bb_;      // p x p covariate block
  Eigen::MatrixXd border_;  // p x N
  Eigen::VectorXd diag_;    // N
  Eigen::MatrixXd schur_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

// A' theta for the augmented design (theta = (beta, alpha)).
inline void apply_design(const PanelRows& rows, const Eigen::VectorXd& theta,
                         Eigen::VectorXd& out) {
  const auto p = rows.p();
  if (p > 0) {
    out.noalias() = rows.x * theta.head(p);
  } else {
    out.setZero(rows.n());
  }
  for (Eigen::Index k = 0; k < rows.n(); ++k) {
    out[k] += rows.ind[k] * theta[p + rows.unit[k]];
  }
}

// A h: accumulate rows into (p + N) coordinates.
inline void apply_design_t(const PanelRows& rows, const Eigen::VectorXd& h,
                           Eigen::VectorXd& rb, Eigen::VectorXd& ra) {
  const auto p = rows.p();
  if (p > 0) rb.noalias() = rows.x.transpose() * h;
  ra.setZero(rows.n_units);
  for (Eigen::Index k = 0; k < rows.n(); ++k) {
    ra[rows.unit[k]] += rows.ind[k] * h[k];
  }
}

// Frisch-Newton interior point method on the LP dual of the quantile
// regression problem:
//
//   min -y'a   s.t.  A a = (1-tau) A 1,  a in [0,1]^n,
//
// where A is the transposed augmented design. The free dual variable of the
// equality constraint converges to -theta_hat. Mehrotra predictor-corrector
// steps with a 0.9995 fraction to the boundary; the start a = (1-tau) 1 is
// primal feasible, and z - q tracks the dual residual exactly, so only
// complementarity has to be driven to zero.
inline QrLpSolution solve_qr_lp(const PanelRows& rows, double tau, double tol,
                                int max_iter) {
  if (!(tau > 0.0 && tau < 1.0)) {
    fail(errc::invalid_argument, "tau must be in (0,1)");
  }
  if (!(tol > 0.0)) fail(errc::invalid_argument, "tol must be positive");
  if (max_iter < 1) fail(errc::invalid_argument, "max_iter must be >= 1");

  const Eigen::Index n = rows.n();
  const auto p = rows.p();
  const int m = static_cast<int>(p) + rows.n_units;
  constexpr double kStep = 0.9995;
  constexpr double kBig = std::numeric_limits<double>::max();

  const Eigen::VectorXd c = -rows.y;
  Eigen::VectorXd b_rb(p), b_ra(rows.n_units);
  {
    Eigen::VectorXd ones = Eigen::VectorXd::Constant(n, 1.0 - tau);
    apply_design_t(rows, ones, b_rb, b_ra);
  }

  ArrowheadSolver arrow(rows);
  Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
  arrow.factorize(d);
  arrow.require_full_rank();

  // Least-squares start for the free dual variable.
  Eigen::VectorXd theta(m), rb(p), ra(rows.n_units);
  apply_design_t(rows, c, rb, ra);
  arrow.solve(rb, ra, theta);

  Eigen::VectorXd a = Eigen::VectorXd::Constant(n, 1.0 - tau);
  Eigen::VectorXd s = Eigen::VectorXd::Constant(n, tau);
  Eigen::VectorXd at_theta(n);
  apply_design(rows, theta, at_theta);
  Eigen::VectorXd r = c - at_theta;
  Eigen::VectorXd z(n), q(n);
  const double eps0 = tol;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double pad = std::abs(r[k]) < eps0 ? eps0 : 0.0;
    z[k] = std::max(r[k], 0.0) + pad;
    q[k] = std::max(-r[k], 0.0) + pad;
  }

  // The LP duality gap bounds the check-loss suboptimality of the extracted
  // parameters, so convergence is measured relative to the current objective.
  Eigen::VectorXd work_n(n);
  auto rel_gap_of = [&](double gap) {
    apply_design(rows, theta, work_n);
    double obj = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      obj += check_loss(rows.y[k] + work_n[k], tau);
    }
    return gap / (1.0 + obj);
  };

  double gap = z.dot(a) + q.dot(s);
  QrLpSolution sol;
  Eigen::VectorXd r_dual(n), da(n), ds(n), dz(n), dq(n), dtheta(m);
  Eigen::VectorXd rhs_b(p), rhs_a(rows.n_units), aff_b(p), aff_a(rows.n_units);
  Eigen::VectorXd t_vec(n), dr(n), dadz(n), dsdq(n);

  Eigen::VectorXd pr_b(p), pr_a(rows.n_units);
  auto step_len = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double best = kBig;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (dv[k] < 0.0) best = std::min(best, -v[k] / dv[k]);
    }
    return best;
  };

  int it = 0;
  while (rel_gap_of(gap) > tol && it < max_iter) {
    ++it;
    d.array() = 1.0 / (z.array() / a.array() + q.array() / s.array());
    r_dual = z - q;

    arrow.factorize(d);

    // Affine (predictor) direction. The primal residual b - A a is zero by
    // construction; it is folded in anyway to absorb floating-point drift.
    t_vec.array() = d.array() * r_dual.array();
    apply_design_t(rows, t_vec, rhs_b, rhs_a);
    apply_design_t(rows, a, pr_b, pr_a);
    if (p > 0) rhs_b += b_rb - pr_b;
    rhs_a += b_ra - pr_a;
    aff_b = rhs_b;
    aff_a = rhs_a;
    arrow.solve(rhs_b, rhs_a, dtheta);
    apply_design(rows, dtheta, t_vec);
    t_vec -= r_dual;

    da.array() = d.array() * t_vec.array();
    ds = -da;
    dz.array() = -z.array() * (da.array() / a.array() + 1.0);
    dq.array() = -q.array() * (ds.array() / s.array() + 1.0);

    double delta_p = std::min({step_len(a, da), step_len(s, ds), kBig});
    double delta_d = std::min({step_len(z, dz), step_len(q, dq), kBig});
    delta_p = std::min(kStep * delta_p, 1.0);
    delta_d = std::min(kStep * delta_d, 1.0);

    if (std::min(delta_p, delta_d) < 1.0) {
      // Mehrotra corrector.
      const double mu_aff = gap + delta_p * da.dot(z) + delta_d * dz.dot(a) +
                            delta_p * delta_d * da.dot(dz) +
                            delta_p * ds.dot(q) + delta_d * dq.dot(s) +
                            delta_p * delta_d * ds.dot(dq);
      const double ratio = std::max(mu_aff / gap, 0.0);
      const double mu = gap * ratio * ratio * ratio / (2.0 * n);

      dadz.array() = da.array() * dz.array();
      dsdq.array() = ds.array() * dq.array();
      dr.array() = d.array() * (mu * (1.0 / s.array() - 1.0 / a.array()) +
                                dadz.array() / a.array() -
                                dsdq.array() / s.array());
      apply_design_t(rows, dr, rhs_b, rhs_a);
      rhs_b += aff_b;
      rhs_a += aff_a;
      arrow.solve(rhs_b, rhs_a, dtheta);
      apply_design(rows, dtheta, t_vec);

      da.array() = d.array() * (t_vec.array() - r_dual.array()) - dr.array();
      ds = -da;
      dz.array() =
          -z.array() + (mu - z.array() * da.array() - dadz.array()) / a.array();
      dq.array() =
          -q.array() + (mu - q.array() * ds.array() - dsdq.array()) / s.array();

      delta_p = std::min({step_len(a, da), step_len(s, ds), kBig});
      delta_d = std::min({step_len(z, dz), step_len(q, dq), kBig});
      delta_p = std::min(kStep * delta_p, 1.0);
      delta_d = std::min(kStep * delta_d, 1.0);
    }

    a += delta_p * da;
    s += delta_p * ds;
    theta += delta_d * dtheta;
    z += delta_d * dz;
    q += delta_d * dq;
    gap = z.dot(a) + q.dot(s);
    if (!std::isfinite(gap)) {
      fail(errc::no_convergence, "interior point iterate diverged");
    }
  }

  sol.theta = -theta;
  sol.rel_gap = rel_gap_of(gap);
  sol.iterations = it;
  sol.converged = sol.rel_gap <= tol;
  return sol;
}

// Builds scaled rows from a dataset, dropping zero-weight observations.
// keep[k] records the flat dataset index of retained row k.
inline PanelRows build_rows(const PanelDataset& data,
                            const Eigen::VectorXd* weights,
                            std::vector<std::int64_t>* keep_out) {
  const int N = data.n_units();
  const int T = data.n_periods();
  const int p = data.n_covariates();
  std::vector<std::int64_t> keep;
  keep.reserve(data.n_obs());
  if (weights != nullptr) {
    if (weights->size() != data.n_obs()) {
      fail(errc::invalid_argument, "obs_weights length must equal N*T");
    }
    std::vector<int> unit_nonzero(N, 0);
    for (std::int64_t k = 0; k < weights->size(); ++k) {
      const double w = (*weights)[k];
      if (!std::isfinite(w) || w < 0.0) {
        fail(errc::invalid_argument,
             "obs_weights must be finite and nonnegative");
      }
      if (w > 0.0) {
        keep.push_back(k);
        unit_nonzero[static_cast<int>(k / T)] = 1;
      }
    }
    for (int i = 0; i < N; ++i) {
      if (!unit_nonzero[i]) {
        fail(errc::all_weights_zero_for_unit,
             "unit '" + data.unit_ids()[i] +
                 "' has all-zero weights; its effect is unidentified");
      }
    }
  } else {
    for (std::int64_t k = 0; k < data.n_obs(); ++k) keep.push_back(k);
  }

  PanelRows rows;
  const auto n = static_cast<Eigen::Index>(keep.size());
  rows.x.resize(n, p);
  rows.ind.resize(n);
  rows.y.resize(n);
  rows.unit.resize(keep.size());
  rows.n_units = N;
  const Eigen::VectorXd yf = data.y_flat();
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::int64_t flat = keep[k];
    const double w = weights ? (*weights)[flat] : 1.0;
    rows.x.row(k) = w * data.x().row(flat);
    rows.y[k] = w * yf[flat];
    rows.ind[k] = w;
    rows.unit[k] = static_cast<int32_t>(flat / T);
  }
  if (keep_out) *keep_out = std::move(keep);
  return rows;
}

}  // namespace detail

// Fixed-effects quantile regression: minimizes the (optionally weighted)
// total check loss over slopes and one additive effect per unit.
inline QuantileFit fit_feqr(const PanelDataset& data, double tau,
                            const SolverOptions& opts = {}) {
  const int N = data.n_units();
  const int T = data.n_periods();
  const int p = data.n_covariates();

  const Eigen::VectorXd* w =
      opts.obs_weights.has_value() ? &*opts.obs_weights : nullptr;
  detail::PanelRows rows = detail::build_rows(data, w, nullptr);
  detail::QrLpSolution sol =
      detail::solve_qr_lp(rows, tau, opts.tol, opts.max_iter);

  QuantileFit fit;
  fit.tau = tau;
  fit.beta = sol.theta.head(p);
  fit.alpha = sol.theta.tail(N);
  fit.iterations = sol.iterations;
  fit.duality_gap = sol.rel_gap;
  fit.residuals.resize(N, T);
  fit.objective = 0.0;
  for (int i = 0; i < N; ++i) {
    for (int t = 0; t < T; ++t) {
      const double u =
          data.y(i, t) - data.x_row(i, t).dot(fit.beta) - fit.alpha[i];
      fit.residuals(i, t) = u;
      const double wk = w ? (*w)[data.flat_index(i, t)] : 1.0;
      fit.objective += wk * check_loss(u, tau);
    }
  }
  if (!sol.converged) {
    fail(errc::no_convergence,
         "FE-QR solver: relative duality gap " + fmt_g17(sol.rel_gap) +
             " > tol after " + std::to_string(sol.iterations) + " iterations");
  }
  return fit;
}

}  // namespace panelqboot
