#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <cstdint>
#include <vector>

namespace panelqboot::detail {

inline double gauss_kernel(double v) {
  return std::exp(-0.5 * v * v) * 0.3989422804014327;
}

// Hall-Sheather rate-optimal bandwidth on the probability scale, at the
// conventional alpha = 0.05.
inline double hall_sheather_bandwidth(double tau, std::int64_t n) {
  const boost::math::normal_distribution<double> norm;
  const double z = boost::math::quantile(norm, 1.0 - 0.05 / 2.0);
  const double q = boost::math::quantile(norm, tau);
  const double dens = boost::math::pdf(norm, q);
  const double factor =
      std::cbrt(1.5 * dens * dens / (2.0 * q * q + 1.0));
  double h = std::pow(static_cast<double>(n), -1.0 / 3.0) *
             std::cbrt(z * z) * factor;
  while (tau - h <= 0.0 || tau + h >= 1.0) h /= 2.0;
  return h;
}

inline double bofinger_bandwidth(double tau, std::int64_t n) {
  const boost::math::normal_distribution<double> norm;
  const double q = boost::math::quantile(norm, tau);
  const double dens = boost::math::pdf(norm, q);
  const double d2 = 2.0 * q * q + 1.0;
  double h = std::pow(static_cast<double>(n), -0.2) *
             std::pow(4.5 * std::pow(dens, 4) / (d2 * d2), 0.2);
  while (tau - h <= 0.0 || tau + h >= 1.0) h /= 2.0;
  return h;
}

// Maps a probability-scale bandwidth to the residual scale: normal quantile
// spacing around tau times a robust spread estimate (sd vs IQR/1.34).
inline double residual_scale_bandwidth(const Eigen::VectorXd& resid,
                                       double tau, double prob_bw) {
  const boost::math::normal_distribution<double> norm;
  const auto n = resid.size();
  std::vector<double> sorted(resid.data(), resid.data() + n);
  std::sort(sorted.begin(), sorted.end());
  auto quantile_at = [&](double p) {
    const double pos = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min<std::size_t>(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
  };
  const double iqr = quantile_at(0.75) - quantile_at(0.25);
  const double mean = resid.mean();
  const double sd =
      std::sqrt((resid.array() - mean).square().sum() /
                std::max<double>(1.0, static_cast<double>(n - 1)));
  const double spread = std::min(sd, iqr / 1.34);
  const double width = boost::math::quantile(norm, tau + prob_bw) -
                       boost::math::quantile(norm, tau - prob_bw);
  return width * (spread > 0.0 ? spread : 1.0);
}

}  // namespace panelqboot::detail
