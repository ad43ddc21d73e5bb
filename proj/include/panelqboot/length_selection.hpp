#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "panelqboot/bandwidth.hpp"
#include "panelqboot/errors.hpp"
#include "panelqboot/feqr.hpp"
#include "panelqboot/loss.hpp"
#include "panelqboot/panel_data.hpp"

namespace panelqboot {

// Lag-weight kernel for dependence estimation. weight(k) takes the lag in
// periods: triangular max(0, 1 - k/h), rectangular 1{k <= h}.
struct KernelSpec {
  enum class Shape { triangular, rectangular };
  Shape shape = Shape::triangular;
  double bandwidth = 1.0;  // h, in lag units

  double weight(double k) const {
    if (shape == Shape::rectangular) return k <= bandwidth ? 1.0 : 0.0;
    return std::max(0.0, 1.0 - k / bandwidth);
  }
  std::string name() const {
    return shape == Shape::triangular ? "triangular" : "rectangular";
  }
};

// Default: rectangular with h = 5*ceil(T^{1/3}) lags. The window has to
// cover the decaying score autocovariances without reaching so far that the
// first-order-condition cancellation of the fitted scores takes over, and it
// has to be wide enough that under independence the (negative) finite-sample
// bias of the fitted score products dominates their noise, so the selection
// concentrates on l = 1 there. A flat window maximizes that bias-to-noise
// ratio (~ sqrt(h)/2 standard errors below zero).
inline KernelSpec default_kernel(int periods) {
  KernelSpec k;
  k.shape = KernelSpec::Shape::rectangular;
  k.bandwidth = 5.0 * std::ceil(std::cbrt(static_cast<double>(periods)));
  return k;
}

struct SelectionDiagnostics {
  int l_hat = 1;
  std::vector<int> per_unit;         // l_hat_i
  KernelSpec kernel;
  int search_cap = 25;               // L
  Eigen::MatrixXd rhs_estimate;      // p x p kernel-weighted dependence
  bool negative_dependence = false;
  std::vector<double> lhs_curve;     // unit-averaged LHS(l), l = 1..L
  std::vector<double> rhs_per_unit;  // trace of each unit's RHS
};

enum class CenteringMode { demean, density_weighted };

// Centered regressors x_checked. demean subtracts the unit mean; the
// density-weighted mode subtracts g_i / phi_i, where phi_i and g_i are
// Gaussian-kernel moments of the residual density at zero (the same objects
// the plug-in covariance uses).
inline Eigen::MatrixXd centered_regressors(
    const PanelDataset& data, CenteringMode mode,
    const QuantileFit* fit = nullptr,
    std::optional<double> bandwidth = std::nullopt) {
  const int N = data.n_units();
  const int T = data.n_periods();
  const int p = data.n_covariates();
  Eigen::MatrixXd out(data.n_obs(), p);

  if (mode == CenteringMode::demean) {
    for (int i = 0; i < N; ++i) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(p);
      for (int t = 0; t < T; ++t) mean += data.x_row(i, t);
      mean /= static_cast<double>(T);
      for (int t = 0; t < T; ++t) {
        out.row(data.flat_index(i, t)) = data.x_row(i, t) - mean;
      }
    }
    return out;
  }

  if (fit == nullptr) {
    fail(errc::missing_fit, "density-weighted centering requires a fit");
  }
  double h;
  if (bandwidth.has_value()) {
    h = *bandwidth;
  } else {
    const double hp = detail::hall_sheather_bandwidth(fit->tau, data.n_obs());
    h = detail::residual_scale_bandwidth(fit->residuals_flat(), fit->tau, hp);
  }
  if (!(h > 0.0)) fail(errc::invalid_argument, "bandwidth must be positive");
  for (int i = 0; i < N; ++i) {
    double phi = 0.0;
    Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(p);
    for (int t = 0; t < T; ++t) {
      const double k = detail::gauss_kernel(fit->residuals(i, t) / h) / h;
      phi += k;
      g += k * data.x_row(i, t);
    }
    phi /= static_cast<double>(T);
    g /= static_cast<double>(T);
    if (phi <= 1e-12) {
      fail(errc::degenerate_density,
           "estimated residual density at zero vanishes for unit '" +
               data.unit_ids()[i] + "'");
    }
    const Eigen::RowVectorXd center = g / phi;
    for (int t = 0; t < T; ++t) {
      out.row(data.flat_index(i, t)) = data.x_row(i, t) - center;
    }
  }
  return out;
}

namespace detail {

// Kernel-weighted score autocovariance of unit i (matrix form, doubled):
//   2 sum_k ((T-k)/T) K(k) (1/(T-k)) sum_t x_t psi_t x_{t+k}' psi_{t+k}.
inline Eigen::MatrixXd unit_dependence(const QuantileFit& fit,
                                       const Eigen::MatrixXd& x_checked,
                                       const KernelSpec& kernel, int i) {
  const int T = static_cast<int>(fit.residuals.cols());
  const auto p = x_checked.cols();
  const double tau = fit.tau;
  Eigen::MatrixXd g(T, p);
  for (int t = 0; t < T; ++t) {
    g.row(t) = x_checked.row(static_cast<Eigen::Index>(i) * T + t) *
               score_psi(fit.residuals(i, t), tau);
  }
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
  for (int k = 1; k < T; ++k) {
    const double w = kernel.weight(k);
    if (w == 0.0) continue;
    Eigen::MatrixXd lagsum = Eigen::MatrixXd::Zero(p, p);
    for (int t = 0; t + k < T; ++t) {
      lagsum.noalias() += g.row(t).transpose() * g.row(t + k);
    }
    acc += (2.0 * w / T) * lagsum;
  }
  return acc;
}

}  // namespace detail

// Kernel-weighted estimate of the serial-dependence part of the score
// variance (the gap between the long-run and contemporaneous variances).
// A negative trace signals dominantly negative autocovariances, in which
// case partitioned resampling can only be conservative.
inline Eigen::MatrixXd dependence_estimate(const QuantileFit& fit,
                                           const Eigen::MatrixXd& x_checked,
                                           const KernelSpec& kernel) {
  const int N = static_cast<int>(fit.residuals.rows());
  const auto p = x_checked.cols();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < N; ++i) {
    acc += detail::unit_dependence(fit, x_checked, kernel, i);
  }
  acc /= static_cast<double>(N);
  return 0.5 * (acc + acc.transpose());
}

// Closed-form cell length: one plus the kernel-weighted sum of score
// autocovariances scaled by 2/(tau(1-tau)), rounded up and clamped to
// [0, ...]; the +1 overestimates slightly by construction. Capped at T.
inline int select_length_closed_form(const QuantileFit& fit,
                                     const KernelSpec& kernel) {
  const int N = static_cast<int>(fit.residuals.rows());
  const int T = static_cast<int>(fit.residuals.cols());
  const double tau = fit.tau;
  double sum = 0.0;
  for (int i = 0; i < N; ++i) {
    for (int k = 1; k < T; ++k) {
      const double w = kernel.weight(k);
      if (w == 0.0) continue;
      double s = 0.0;
      for (int t = 0; t + k < T; ++t) {
        s += score_psi(fit.residuals(i, t), tau) *
             score_psi(fit.residuals(i, t + k), tau);
      }
      sum += w * s;
    }
  }
  const double a =
      2.0 / (tau * (1.0 - tau)) * sum / (static_cast<double>(N) * T);
  const double clamped = std::max(std::ceil(a), 0.0);
  const int l = 1 + static_cast<int>(clamped);
  return std::min(l, T);
}

namespace detail {

// Within-cell regressor autoproduct curve for candidate length l (doubled,
// trace form): 2 tau(1-tau) sum_{k<l} ((l-k)/l) avg_{cells,s} x_s . x_{s+k}.
// Only the floor(T/l) full cells enter.
inline double unit_lhs_curve(const Eigen::MatrixXd& x_checked, int i, int T,
                             double tau, int l) {
  if (l <= 1) return 0.0;
  const int b = T / l;
  double total = 0.0;
  for (int k = 1; k < l; ++k) {
    double s = 0.0;
    for (int j = 0; j < b; ++j) {
      const int begin = j * l;
      for (int t = 0; t + k < l; ++t) {
        s += x_checked.row(static_cast<Eigen::Index>(i) * T + begin + t)
                 .dot(x_checked.row(static_cast<Eigen::Index>(i) * T + begin +
                                    t + k));
      }
    }
    total += (static_cast<double>(l - k) / l) * s /
             (static_cast<double>(b) * (l - k));
  }
  return 2.0 * tau * (1.0 - tau) * total;
}

}  // namespace detail

// Unit-by-unit cell length selection: for each unit, picks the l in 1..L
// whose within-cell autoproduct curve best matches the kernel-weighted score
// dependence (absolute difference, ties to the smaller l), then averages and
// rounds half-up. When the pooled dependence trace is negative the selection
// clamps to l = 1 and flags conservative inference.
inline SelectionDiagnostics select_length_per_unit(
    const QuantileFit& fit, const Eigen::MatrixXd& x_checked,
    const KernelSpec& kernel, int search_cap = 25) {
  const int N = static_cast<int>(fit.residuals.rows());
  const int T = static_cast<int>(fit.residuals.cols());
  if (search_cap < 1 || search_cap > T) {
    fail(errc::invalid_length, "search cap must satisfy 1 <= L <= T");
  }
  const double tau = fit.tau;

  SelectionDiagnostics diag;
  diag.kernel = kernel;
  diag.search_cap = search_cap;
  diag.per_unit.resize(N);
  diag.rhs_per_unit.resize(N);
  diag.lhs_curve.assign(search_cap, 0.0);
  diag.rhs_estimate =
      Eigen::MatrixXd::Zero(x_checked.cols(), x_checked.cols());

  double rhs_total = 0.0;
  double l_sum = 0.0;
  for (int i = 0; i < N; ++i) {
    const Eigen::MatrixXd rhs_mat =
        detail::unit_dependence(fit, x_checked, kernel, i);
    const double rhs = rhs_mat.trace();
    diag.rhs_per_unit[i] = rhs;
    diag.rhs_estimate += rhs_mat;
    rhs_total += rhs;

    int best_l = 1;
    double best_err = std::abs(rhs);  // LHS(1) = 0
    diag.lhs_curve[0] += 0.0;
    for (int l = 2; l <= search_cap; ++l) {
      const double lhs = detail::unit_lhs_curve(x_checked, i, T, tau, l);
      diag.lhs_curve[l - 1] += lhs;
      const double err = std::abs(lhs - rhs);
      if (err < best_err) {
        best_err = err;
        best_l = l;
      }
    }
    diag.per_unit[i] = best_l;
    l_sum += best_l;
  }
  diag.rhs_estimate /= static_cast<double>(N);
  diag.rhs_estimate =
      (0.5 * (diag.rhs_estimate + diag.rhs_estimate.transpose())).eval();
  for (auto& v : diag.lhs_curve) v /= static_cast<double>(N);

  diag.negative_dependence = rhs_total < 0.0;
  if (diag.negative_dependence) {
    diag.l_hat = 1;
  } else {
    const int rounded =
        static_cast<int>(std::floor(l_sum / static_cast<double>(N) + 0.5));
    diag.l_hat = std::min(std::max(rounded, 1), search_cap);
  }
  return diag;
}

}  // namespace panelqboot
