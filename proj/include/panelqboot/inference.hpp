#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "panelqboot/bandwidth.hpp"
#include "panelqboot/errors.hpp"
#include "panelqboot/feqr.hpp"
#include "panelqboot/panel_data.hpp"

namespace panelqboot {

inline double normal_quantile(double p) {
  const boost::math::normal_distribution<double> norm;
  return boost::math::quantile(norm, p);
}

inline double chi_squared_sf(double x, int df) {
  const boost::math::chi_squared_distribution<double> chi2(df);
  return boost::math::cdf(boost::math::complement(chi2, x));
}

enum class CiMethod { percentile, se_normal };

struct ConfidenceInterval {
  int coordinate = 0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.9;  // 1 - lambda
  CiMethod method = CiMethod::percentile;
};

enum class CovSource { bootstrap, powell_iid };

struct CovarianceEstimate {
  Eigen::MatrixXd sigma;  // p x p sampling covariance of beta_hat
  CovSource source = CovSource::bootstrap;
};

// Percentile interval from bootstrap draws: the ceil(B*lambda/2)-th and
// ceil(B*(1-lambda/2))-th order statistics (no interpolation, so results are
// reproducible from integer seeds alone).
inline ConfidenceInterval percentile_ci(const Eigen::MatrixXd& draws,
                                        double level, int coordinate) {
  const auto B = draws.rows();
  if (B < 20) fail(errc::too_few_draws, "percentile CI needs >= 20 draws");
  if (!(level > 0.0 && level < 1.0)) {
    fail(errc::invalid_argument, "level must be in (0,1)");
  }
  if (coordinate < 0 || coordinate >= draws.cols()) {
    fail(errc::invalid_argument, "coordinate out of range");
  }
  const double lambda = 1.0 - level;
  std::vector<double> v(B);
  for (Eigen::Index b = 0; b < B; ++b) v[b] = draws(b, coordinate);
  std::sort(v.begin(), v.end());
  auto order_stat = [&](double frac) {
    auto k = static_cast<std::int64_t>(
        std::ceil(frac * static_cast<double>(B)));
    k = std::max<std::int64_t>(1, std::min<std::int64_t>(k, B));
    return v[static_cast<std::size_t>(k - 1)];
  };
  ConfidenceInterval ci;
  ci.coordinate = coordinate;
  ci.level = level;
  ci.method = CiMethod::percentile;
  ci.lower = order_stat(lambda / 2.0);
  ci.upper = order_stat(1.0 - lambda / 2.0);
  return ci;
}

// Bootstrap covariance centered at beta_hat (not at the draw mean).
inline CovarianceEstimate boot_covariance(const Eigen::MatrixXd& draws,
                                          const Eigen::VectorXd& beta_hat) {
  const auto B = draws.rows();
  if (B < 2) fail(errc::too_few_draws, "covariance needs >= 2 draws");
  if (draws.cols() != beta_hat.size()) {
    fail(errc::dimension_mismatch, "draws and beta_hat disagree on p");
  }
  const Eigen::MatrixXd centered = draws.rowwise() - beta_hat.transpose();
  CovarianceEstimate est;
  est.sigma = centered.transpose() * centered / static_cast<double>(B);
  est.source = CovSource::bootstrap;
  return est;
}

inline ConfidenceInterval se_ci(const Eigen::VectorXd& beta_hat,
                                const CovarianceEstimate& cov, double level,
                                int coordinate) {
  if (!(level > 0.0 && level < 1.0)) {
    fail(errc::invalid_argument, "level must be in (0,1)");
  }
  if (coordinate < 0 || coordinate >= beta_hat.size()) {
    fail(errc::invalid_argument, "coordinate out of range");
  }
  double var = cov.sigma(coordinate, coordinate);
  if (var < -1e-10) {
    fail(errc::negative_variance,
         "variance estimate is negative: " + fmt_g17(var));
  }
  var = std::max(var, 0.0);
  const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);
  const double half = z * std::sqrt(var);
  ConfidenceInterval ci;
  ci.coordinate = coordinate;
  ci.level = level;
  ci.method = CiMethod::se_normal;
  ci.lower = beta_hat[coordinate] - half;
  ci.upper = beta_hat[coordinate] + half;
  return ci;
}

struct WaldResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int df = 0;
};

// Wald test of R beta = r with a chi-squared reference on q = rank(R) dof.
inline WaldResult wald_test(const Eigen::MatrixXd& R, const Eigen::VectorXd& r,
                            const Eigen::VectorXd& beta_hat,
                            const CovarianceEstimate& cov) {
  const auto q = R.rows();
  if (q < 1 || R.cols() != beta_hat.size() || r.size() != q) {
    fail(errc::invalid_argument, "restriction dimensions are inconsistent");
  }
  Eigen::FullPivLU<Eigen::MatrixXd> rank_check(R);
  rank_check.setThreshold(1e-10);
  if (rank_check.rank() < q) {
    fail(errc::singular_restriction, "R does not have full row rank");
  }
  const Eigen::MatrixXd mid = R * cov.sigma * R.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(mid);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    fail(errc::singular_restriction, "R Sigma R' is singular");
  }
  const Eigen::VectorXd dev = R * beta_hat - r;
  WaldResult out;
  out.statistic = dev.dot(lu.solve(dev));
  out.df = static_cast<int>(q);
  out.p_value = chi_squared_sf(std::max(out.statistic, 0.0), out.df);
  return out;
}

enum class BandwidthRule { hall_sheather, bofinger };

struct PowellOptions {
  std::optional<double> bandwidth;  // residual-scale; default data-driven
  BandwidthRule rule = BandwidthRule::hall_sheather;
};

struct PowellMoments {
  Eigen::MatrixXd d_hat;  // avg(J_i - g_i g_i'/phi_i)
  Eigen::MatrixXd v0;     // tau(1-tau) avg of x_tilde x_tilde'
  double bandwidth = 0.0;
};

// Gaussian-kernel density moments at the residual origin: per-unit phi_i,
// g_i, J_i, the curvature D_hat and the independence-form score variance V0
// (built from x_tilde = x - g_i/phi_i).
inline PowellMoments powell_moments(const QuantileFit& fit,
                                    const PanelDataset& data,
                                    const PowellOptions& opts = {}) {
  const int N = data.n_units();
  const int T = data.n_periods();
  const int p = data.n_covariates();
  const double tau = fit.tau;

  double h;
  if (opts.bandwidth.has_value()) {
    h = *opts.bandwidth;
    if (!(h > 0.0)) fail(errc::invalid_argument, "bandwidth must be > 0");
  } else {
    const double hp = opts.rule == BandwidthRule::hall_sheather
                          ? detail::hall_sheather_bandwidth(tau, data.n_obs())
                          : detail::bofinger_bandwidth(tau, data.n_obs());
    h = detail::residual_scale_bandwidth(fit.residuals_flat(), tau, hp);
  }

  PowellMoments out;
  out.bandwidth = h;
  out.d_hat = Eigen::MatrixXd::Zero(p, p);
  out.v0 = Eigen::MatrixXd::Zero(p, p);
  std::vector<Eigen::RowVectorXd> centers(N);
  for (int i = 0; i < N; ++i) {
    double phi = 0.0;
    Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(p);
    Eigen::MatrixXd j_mat = Eigen::MatrixXd::Zero(p, p);
    for (int t = 0; t < T; ++t) {
      const double k = detail::gauss_kernel(fit.residuals(i, t) / h) / h;
      const auto xr = data.x_row(i, t);
      phi += k;
      g += k * xr;
      j_mat.noalias() += k * xr.transpose() * xr;
    }
    phi /= static_cast<double>(T);
    g /= static_cast<double>(T);
    j_mat /= static_cast<double>(T);
    if (phi <= 1e-12) {
      fail(errc::degenerate_density,
           "residual density estimate vanishes for unit '" +
               data.unit_ids()[i] + "'");
    }
    out.d_hat += j_mat - g.transpose() * g / phi;
    centers[i] = g / phi;
  }
  out.d_hat /= static_cast<double>(N);
  for (int i = 0; i < N; ++i) {
    for (int t = 0; t < T; ++t) {
      const Eigen::RowVectorXd xt = data.x_row(i, t) - centers[i];
      out.v0.noalias() += xt.transpose() * xt;
    }
  }
  out.v0 *= tau * (1.0 - tau) / static_cast<double>(data.n_obs());
  return out;
}

// Kernel plug-in sandwich covariance, valid under independence:
//   Sigma_hat = D_hat^{-1} V0_hat D_hat^{-1} / (NT).
inline CovarianceEstimate powell_variance(const QuantileFit& fit,
                                          const PanelDataset& data,
                                          const PowellOptions& opts = {}) {
  const PowellMoments m = powell_moments(fit, data, opts);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m.d_hat);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    fail(errc::singular_d, "density-weighted design matrix is singular");
  }
  const Eigen::MatrixXd d_inv = lu.inverse();
  CovarianceEstimate est;
  est.sigma = d_inv * m.v0 * d_inv / static_cast<double>(data.n_obs());
  est.sigma = (0.5 * (est.sigma + est.sigma.transpose())).eval();
  est.source = CovSource::powell_iid;
  return est;
}

}  // namespace panelqboot
