#pragma once

// Test-side analytic oracles, independent of the library implementation.

#include <cmath>
#include <vector>

namespace pqbtest {

// Autocorrelation sequence r_1..r_K of a stationary AR(2) via Yule-Walker:
// r_1 = rho1/(1-rho2), r_k = rho1 r_{k-1} + rho2 r_{k-2}.
inline std::vector<double> ar2_autocorr(double rho1, double rho2, int max_lag) {
  std::vector<double> r(max_lag + 1, 0.0);
  r[0] = 1.0;
  if (max_lag >= 1) r[1] = rho1 / (1.0 - rho2);
  for (int k = 2; k <= max_lag; ++k) r[k] = rho1 * r[k - 1] + rho2 * r[k - 2];
  return r;
}

// For a bivariate Gaussian pair with correlation rho and zero medians,
// P(u_t < 0, u_{t+k} < 0) = 1/4 + arcsin(rho)/(2 pi); at tau = 1/2 this
// makes E[psi(u_t) psi(u_{t+k})] = arcsin(rho)/(2 pi).
inline double gaussian_psi_product(double rho) {
  return std::asin(rho) / (2.0 * 3.14159265358979323846);
}

}  // namespace pqbtest
