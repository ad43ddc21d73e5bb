#pragma once

namespace panelqboot {

// Asymmetric check loss rho_tau(u) = u * (tau - 1{u < 0}); nonnegative,
// zero only at u = 0. Positively homogeneous: rho(c*u) = c*rho(u), c > 0.
inline double check_loss(double u, double tau) {
  return u * (tau - (u < 0.0 ? 1.0 : 0.0));
}

// Quantile score psi_tau(u) = tau - 1{u < 0}. At u = 0 the indicator is 0,
// so psi(0) = tau; zero residuals must use this convention consistently.
inline double score_psi(double u, double tau) {
  return tau - (u < 0.0 ? 1.0 : 0.0);
}

}  // namespace panelqboot
