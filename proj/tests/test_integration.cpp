#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "panelqboot/panelqboot.hpp"
#include "test_util.hpp"

using namespace panelqboot;

namespace {

int hw_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 2 : static_cast<int>(n);
}

}  // namespace

// Large-B law of large numbers inside the bootstrap world: the covariance of
// the replicate draws stabilizes once B is large on fixed data.
TEST(Integration, BootCovarianceSelfConvergence) {
  RngStream rng(91);
  const auto data = pqbtest::random_panel(3, 60, rng);
  const auto fit = fit_feqr(data, 0.5);
  const auto half = run_pwb(data, 0.5, 4, 10000, 31, {}, {}, hw_threads(), &fit);
  const auto full = run_pwb(data, 0.5, 4, 20000, 31, {}, {}, hw_threads(), &fit);
  const double v_half = boot_covariance(half.beta_star, fit.beta).sigma(0, 0);
  const double v_full = boot_covariance(full.beta_star, fit.beta).sigma(0, 0);
  EXPECT_LT(std::abs(v_full - v_half) / v_half, 0.02 * 2.5)
      << "v_half=" << v_half << " v_full=" << v_full;
}

// Distribution-level check of the bootstrap: over replicates, the sampling
// covariance of sqrt(NT)(beta* - beta_hat) matches the sandwich built from
// the plug-in curvature and the exact conditional score variance. Uniform
// errors keep the residual density flat at the origin, where the kernel
// plug-in would otherwise carry smoothing bias bigger than the tolerance.
TEST(Integration, PwbCovarianceMatchesSandwich) {
  RngStream rng(92);
  const int N = 2, T = 1500;
  Eigen::MatrixXd y(N, T), x(N, T);
  for (int i = 0; i < N; ++i) {
    for (int t = 0; t < T; ++t) {
      x(i, t) = rng.normal();
      y(i, t) = 0.5 * (i + 1) + x(i, t) + 2.0 * (rng.uniform01() - 0.5);
    }
  }
  const auto data = pqbtest::make_panel(y, x);
  const double tau = 0.5;
  const auto fit = fit_feqr(data, tau);

  const int cell_len = 4;
  const int reps = 20000;
  const auto boot =
      run_pwb(data, tau, cell_len, reps, 17, {}, {}, hw_threads(), &fit);
  ASSERT_EQ(boot.failures, 0);
  const double emp =
      static_cast<double>(N) * T *
      boot_covariance(boot.beta_star, fit.beta).sigma(0, 0);

  const auto xc = centered_regressors(data, CenteringMode::demean);
  const double v_star =
      conditional_score_variance(fit, make_partition(T, cell_len), xc)(0, 0);
  const double d_hat = powell_moments(fit, data).d_hat(0, 0);
  const double sandwich = v_star / (d_hat * d_hat);
  EXPECT_LT(std::abs(emp - sandwich) / sandwich, 0.05)
      << "emp=" << emp << " sandwich=" << sandwich << " d=" << d_hat;
}

// Independence regime: with no serial dependence the selection picks tiny
// cells and the nominal 90% interval covers at close to 90%.
TEST(Integration, IidRegimeCoverageIsNominal) {
  SimConfig cfg;
  cfg.n_units = 50;
  cfg.n_periods = 200;
  cfg.tau = 0.5;
  cfg.zeta = 0.0;
  cfg.rho1_u = cfg.rho2_u = cfg.rho1_e = cfg.rho2_e = 0.0;
  cfg.mc_reps = 300;
  cfg.bootstrap_reps = 200;
  cfg.level = 0.90;
  cfg.seed = 424242;
  cfg.methods = {BootstrapMethod::pwb};
  cfg.threads = hw_threads();
  const auto report = run_coverage(cfg);
  ASSERT_EQ(report.failed_reps, 0);
  const auto& pwb = report.methods[0].second;
  std::printf("  [detail] iid coverage: se=%.3f percentile=%.3f\n",
              pwb.coverage_se(), pwb.coverage_percentile());
  EXPECT_NEAR(pwb.coverage_se(), 0.90, 0.04);
  EXPECT_NEAR(pwb.coverage_percentile(), 0.90, 0.05);
}
