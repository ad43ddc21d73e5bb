#include <gtest/gtest.h>

#include <cmath>

#include "panelqboot/inference.hpp"
#include "test_util.hpp"

using namespace panelqboot;

namespace {

Eigen::MatrixXd column(const std::vector<double>& v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = v[i];
  }
  return m;
}

}  // namespace

TEST(PercentileCi, OrderStatisticConvention) {
  std::vector<double> draws(100);
  for (int i = 0; i < 100; ++i) draws[i] = i + 1;  // 1..100
  const auto ci = percentile_ci(column(draws), 0.90, 0);
  EXPECT_DOUBLE_EQ(ci.lower, 5.0);   // ceil(100*0.05) = 5th order stat
  EXPECT_DOUBLE_EQ(ci.upper, 95.0);  // ceil(100*0.95) = 95th
}

TEST(PercentileCi, DegenerateDraws) {
  const auto ci = percentile_ci(column(std::vector<double>(30, 3.25)), 0.9, 0);
  EXPECT_DOUBLE_EQ(ci.lower, 3.25);
  EXPECT_DOUBLE_EQ(ci.upper, 3.25);
}

TEST(PercentileCi, TooFewDraws) {
  EXPECT_THROW(percentile_ci(column(std::vector<double>(19, 0.0)), 0.9, 0),
               Error);
}

TEST(PercentileCi, AffineEquivariance) {
  RngStream rng(61);
  std::vector<double> draws(57);
  for (auto& d : draws) d = rng.normal();
  const double a = 2.0, c = 3.5;
  std::vector<double> mapped(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) mapped[i] = a + c * draws[i];
  const auto base = percentile_ci(column(draws), 0.8, 0);
  const auto shifted = percentile_ci(column(mapped), 0.8, 0);
  EXPECT_EQ(shifted.lower, a + c * base.lower);
  EXPECT_EQ(shifted.upper, a + c * base.upper);
}

TEST(BootCovariance, CenteredAtBetaHatExamples) {
  Eigen::VectorXd beta(1);
  beta << 2.0;
  // All draws equal beta_hat -> zero covariance.
  const auto zero = boot_covariance(column({2.0, 2.0, 2.0}), beta);
  EXPECT_DOUBLE_EQ(zero.sigma(0, 0), 0.0);

  // Draws {beta - c, beta + c} -> c^2.
  const double c = 0.75;
  const auto two = boot_covariance(column({2.0 - c, 2.0 + c}), beta);
  EXPECT_DOUBLE_EQ(two.sigma(0, 0), c * c);

  // Centering really is at beta_hat: biased draws do not vanish.
  const auto off = boot_covariance(column({3.0, 3.0}), beta);
  EXPECT_DOUBLE_EQ(off.sigma(0, 0), 1.0);
}

TEST(BootCovariance, OrderInvarianceAndScaling) {
  RngStream rng(62);
  std::vector<double> draws(40);
  for (auto& d : draws) d = rng.normal();
  Eigen::VectorXd beta(1);
  beta << 0.1;
  const auto a = boot_covariance(column(draws), beta);
  std::vector<double> shuffled = draws;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto b = boot_covariance(column(shuffled), beta);
  EXPECT_NEAR(a.sigma(0, 0), b.sigma(0, 0), 1e-15);

  const double c = 2.5;
  std::vector<double> scaled(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) scaled[i] = c * draws[i];
  const auto s = boot_covariance(column(scaled), (c * beta).eval());
  EXPECT_NEAR(s.sigma(0, 0), c * c * a.sigma(0, 0), 1e-12);
}

TEST(SeCi, NormalQuantileExamples) {
  Eigen::VectorXd beta(1);
  beta << 1.0;
  CovarianceEstimate cov;
  cov.sigma = Eigen::MatrixXd::Constant(1, 1, 0.01);  // se = 0.1
  const auto ci95 = se_ci(beta, cov, 0.95, 0);
  EXPECT_NEAR(ci95.lower, 0.8040, 5e-5);
  EXPECT_NEAR(ci95.upper, 1.1960, 5e-5);

  const auto ci90 = se_ci(beta, cov, 0.90, 0);
  EXPECT_NEAR(ci90.upper - 1.0, 1.6449 * 0.1, 5e-5);

  cov.sigma.setZero();
  const auto point = se_ci(beta, cov, 0.9, 0);
  EXPECT_DOUBLE_EQ(point.lower, 1.0);
  EXPECT_DOUBLE_EQ(point.upper, 1.0);
}

TEST(SeCi, WidthMonotoneInLevelAndVariance) {
  Eigen::VectorXd beta(1);
  beta << 0.0;
  CovarianceEstimate cov;
  cov.sigma = Eigen::MatrixXd::Constant(1, 1, 0.04);
  double prev = 0.0;
  for (double level : {0.5, 0.8, 0.9, 0.95, 0.99}) {
    const auto ci = se_ci(beta, cov, level, 0);
    EXPECT_GT(ci.upper - ci.lower, prev);
    prev = ci.upper - ci.lower;
  }
  CovarianceEstimate wider;
  wider.sigma = Eigen::MatrixXd::Constant(1, 1, 0.09);
  EXPECT_GT(se_ci(beta, wider, 0.9, 0).upper, se_ci(beta, cov, 0.9, 0).upper);
}

TEST(SeCi, NegativeVarianceRejected) {
  Eigen::VectorXd beta(1);
  beta << 0.0;
  CovarianceEstimate cov;
  cov.sigma = Eigen::MatrixXd::Constant(1, 1, -1e-6);
  EXPECT_THROW(se_ci(beta, cov, 0.9, 0), Error);
  // Tiny negative rounding is clamped, not rejected.
  cov.sigma(0, 0) = -1e-12;
  EXPECT_NO_THROW(se_ci(beta, cov, 0.9, 0));
}

TEST(Wald, ExactNullGivesZeroStatistic) {
  Eigen::VectorXd beta(2);
  beta << 1.0, -0.5;
  CovarianceEstimate cov;
  cov.sigma = Eigen::MatrixXd::Identity(2, 2) * 0.2;
  const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(2, 2);
  const auto res = wald_test(R, beta, beta, cov);
  EXPECT_NEAR(res.statistic, 0.0, 1e-14);
  EXPECT_NEAR(res.p_value, 1.0, 1e-14);
  EXPECT_EQ(res.df, 2);
}

TEST(Wald, SingleRestrictionMatchesSquaredTRatio) {
  Eigen::VectorXd beta(2);
  beta << 1.4, 0.3;
  CovarianceEstimate cov;
  cov.sigma.resize(2, 2);
  cov.sigma << 0.04, 0.01, 0.01, 0.09;
  Eigen::MatrixXd R(1, 2);
  R << 1.0, 0.0;
  Eigen::VectorXd r(1);
  r << 1.0;
  const auto res = wald_test(R, r, beta, cov);
  const double t = (beta[0] - 1.0) / std::sqrt(cov.sigma(0, 0));
  EXPECT_NEAR(res.statistic, t * t, 1e-12);
}

TEST(Wald, InvariantToNonsingularReparameterization) {
  RngStream rng(63);
  Eigen::VectorXd beta(3);
  beta << 0.2, -1.0, 0.7;
  CovarianceEstimate cov;
  Eigen::MatrixXd root(3, 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) root(i, j) = rng.normal();
  }
  cov.sigma = root * root.transpose() + 0.1 * Eigen::MatrixXd::Identity(3, 3);
  Eigen::MatrixXd R(2, 3);
  R << 1, 0, -1, 0, 1, 1;
  Eigen::VectorXd r(2);
  r << 0.1, -0.2;
  Eigen::MatrixXd A(2, 2);
  A << 2, 1, 0, -1;
  const auto base = wald_test(R, r, beta, cov);
  const auto rotated = wald_test((A * R).eval(), (A * r).eval(), beta, cov);
  EXPECT_NEAR(base.statistic, rotated.statistic, 1e-9);
  EXPECT_NEAR(base.p_value, rotated.p_value, 1e-9);
}

TEST(Wald, SingularRestrictionRejected) {
  Eigen::VectorXd beta(2);
  beta << 0.0, 0.0;
  CovarianceEstimate cov;
  cov.sigma = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd R(2, 2);
  R << 1, 1, 2, 2;  // rank 1
  Eigen::VectorXd r = Eigen::VectorXd::Zero(2);
  EXPECT_THROW(wald_test(R, r, beta, cov), Error);
}

TEST(Wald, NullPvaluesAreUniform) {
  // Simulated exact-null Wald statistics have chi-squared law by
  // construction; the p-value transform must then be uniform.
  RngStream rng(64);
  Eigen::MatrixXd root(2, 2);
  root << 0.5, 0.1, 0.0, 0.3;
  CovarianceEstimate cov;
  cov.sigma = root * root.transpose();
  Eigen::MatrixXd R(2, 2);
  R << 1, 0, 1, 1;
  const Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(2);
  const int n = 4000;
  int below_10 = 0, below_50 = 0;
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd z(2);
    z << rng.normal(), rng.normal();
    const Eigen::VectorXd beta_sim = root * z;  // N(0, sigma)
    const auto res = wald_test(R, (R * beta0).eval(), beta_sim, cov);
    if (res.p_value < 0.10) ++below_10;
    if (res.p_value < 0.50) ++below_50;
  }
  EXPECT_NEAR(below_10 / static_cast<double>(n), 0.10, 0.02);
  EXPECT_NEAR(below_50 / static_cast<double>(n), 0.50, 0.03);
}

TEST(Powell, MatchesAnalyticIidVariance) {
  // x ~ N(0,1), u ~ N(0,1), tau = 0.5: NT * Sigma -> tau(1-tau)/f(0)^2 = pi/2
  // for unit-variance centered x.
  RngStream rng(65);
  const int N = 20, T = 500;
  Eigen::MatrixXd y(N, T), x(N, T);
  for (int i = 0; i < N; ++i) {
    for (int t = 0; t < T; ++t) {
      x(i, t) = rng.normal();
      y(i, t) = 0.1 * (i + 1) + x(i, t) + rng.normal();
    }
  }
  const auto data = pqbtest::make_panel(y, x);
  const auto fit = fit_feqr(data, 0.5);
  const auto cov = powell_variance(fit, data);
  const double scaled = cov.sigma(0, 0) * N * T;
  EXPECT_NEAR(scaled, 1.5707963267948966, 0.12 * 1.5707963267948966);
}

TEST(Powell, SmoothInBandwidth) {
  RngStream rng(66);
  const auto data = pqbtest::random_panel(4, 60, rng);
  const auto fit = fit_feqr(data, 0.5);
  PowellOptions a, b;
  a.bandwidth = 0.3;
  b.bandwidth = 0.6;
  const auto ca = powell_variance(fit, data, a);
  const auto cb = powell_variance(fit, data, b);
  EXPECT_GT(ca.sigma(0, 0), 0.0);
  EXPECT_GT(cb.sigma(0, 0), 0.0);
  const double rel =
      std::abs(ca.sigma(0, 0) - cb.sigma(0, 0)) / ca.sigma(0, 0);
  EXPECT_LT(rel, 0.75);
}

TEST(Powell, BofingerRuleIsAvailable) {
  RngStream rng(67);
  const auto data = pqbtest::random_panel(4, 60, rng);
  const auto fit = fit_feqr(data, 0.5);
  PowellOptions opts;
  opts.rule = BandwidthRule::bofinger;
  const auto cov = powell_variance(fit, data, opts);
  EXPECT_GT(cov.sigma(0, 0), 0.0);
}

TEST(Powell, DegenerateDensityRejected) {
  RngStream rng(68);
  const auto data = pqbtest::random_panel(2, 10, rng);
  QuantileFit fit;
  fit.tau = 0.5;
  fit.beta = Eigen::VectorXd::Zero(1);
  fit.alpha = Eigen::VectorXd::Zero(2);
  fit.residuals = Eigen::MatrixXd::Constant(2, 10, 40.0);
  PowellOptions opts;
  opts.bandwidth = 1e-4;
  try {
    powell_variance(fit, data, opts);
    FAIL() << "expected DegenerateDensity";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::degenerate_density);
  }
}
