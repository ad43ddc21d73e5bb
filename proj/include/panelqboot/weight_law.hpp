#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "panelqboot/errors.hpp"
#include "panelqboot/rng.hpp"

namespace panelqboot {

// Finite discrete bootstrap weight law. A valid law must satisfy, at
// tolerance 1e-12:
//   - probabilities positive and summing to one;
//   - P(w <= 0) = tau (tau is the quantile of the law at zero);
//   - no atom at zero, all atoms finite (bounded support off zero);
//   - -sum_{w<0} p/w = sum_{w>0} p/w = 1/2.
struct WeightAtom {
  double value;
  double prob;
};

struct WeightLaw {
  std::vector<WeightAtom> atoms;
  double tau = 0.5;
};

inline void validate_weight_law(const WeightLaw& law, double tol = 1e-12) {
  if (!(law.tau > 0.0 && law.tau < 1.0)) {
    fail(errc::invalid_weight_law, "law tau must be in (0,1)");
  }
  if (law.atoms.empty()) fail(errc::invalid_weight_law, "law has no atoms");
  double psum = 0.0, neg_mass = 0.0, neg_int = 0.0, pos_int = 0.0;
  for (const auto& a : law.atoms) {
    if (!std::isfinite(a.value) || !std::isfinite(a.prob) || a.prob <= 0.0) {
      fail(errc::invalid_weight_law, "atom probabilities must be positive");
    }
    if (a.value == 0.0) {
      fail(errc::invalid_weight_law, "law must not place mass at zero");
    }
    psum += a.prob;
    if (a.value < 0.0) {
      neg_mass += a.prob;
      neg_int += a.prob / a.value;
    } else {
      pos_int += a.prob / a.value;
    }
  }
  if (std::abs(psum - 1.0) > tol) {
    fail(errc::invalid_weight_law, "atom probabilities must sum to 1");
  }
  if (std::abs(neg_mass - law.tau) > tol) {
    fail(errc::invalid_weight_law,
         "P(w <= 0) must equal tau; got " + fmt_g17(neg_mass));
  }
  if (std::abs(-neg_int - 0.5) > tol || std::abs(pos_int - 0.5) > tol) {
    fail(errc::invalid_weight_law,
         "half-integrals of 1/w must equal -1/2 and +1/2; got " +
             fmt_g17(neg_int) + " and " + fmt_g17(pos_int));
  }
}

// Two-point law {-2*tau with prob tau, 2*(1-tau) with prob 1-tau}: the unique
// two-point distribution meeting all the conditions above.
inline WeightLaw two_point_law(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    fail(errc::invalid_argument, "tau must be in (0,1)");
  }
  WeightLaw law;
  law.tau = tau;
  law.atoms = {{-2.0 * tau, tau}, {2.0 * (1.0 - tau), 1.0 - tau}};
  return law;
}

inline double sample_weight(const WeightLaw& law, RngStream& rng) {
  const double u = rng.uniform01();
  double cum = 0.0;
  for (const auto& a : law.atoms) {
    cum += a.prob;
    if (u < cum) return a.value;
  }
  return law.atoms.back().value;
}

// One i.i.d. weight per (unit, cell), filled row-major (unit outer loop).
inline Eigen::MatrixXd draw_weights(const WeightLaw& law, int n_units,
                                    int n_cells, RngStream& rng) {
  Eigen::MatrixXd w(n_units, n_cells);
  for (int i = 0; i < n_units; ++i) {
    for (int j = 0; j < n_cells; ++j) w(i, j) = sample_weight(law, rng);
  }
  return w;
}

}  // namespace panelqboot
