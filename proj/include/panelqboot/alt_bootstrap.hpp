#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "panelqboot/errors.hpp"
#include "panelqboot/feqr.hpp"
#include "panelqboot/pwb.hpp"
#include "panelqboot/rng.hpp"

namespace panelqboot {

// Within-block taper profile. The base function w lives on [0,1], is
// symmetric about 1/2 and nondecreasing on [0,1/2]; omega_l(s) = w((s-1/2)/l)
// for s = 1..l.
struct TaperSpec {
  enum class Shape { rectangular, triangular };
  Shape shape = Shape::rectangular;

  double base(double t) const {
    if (t < 0.0 || t > 1.0) return 0.0;
    if (shape == Shape::rectangular) return 1.0;
    return t <= 0.5 ? 2.0 * t : 2.0 * (1.0 - t);
  }

  // omega_l(s) for s = 1..l, mirrored so the symmetry is exact in floating
  // point as well.
  Eigen::VectorXd cell_profile(int l) const {
    Eigen::VectorXd w(l);
    for (int s = 1; s <= (l + 1) / 2; ++s) {
      const double v = base((s - 0.5) / static_cast<double>(l));
      w[s - 1] = v;
      w[l - s] = v;
    }
    return w;
  }
};

namespace detail {

// Weights from known block starts (1-based, each in [1, T-l+1]):
//   pi_t = (1/(b*||omega||_1)) sum_j omega(t - I_j + 1).
// Every start contributes its full taper mass, so sum_t pi_t = 1.
inline Eigen::VectorXd block_weights_from_starts(
    int periods, int block_len, const TaperSpec& taper,
    const std::vector<int>& starts) {
  const Eigen::VectorXd omega = taper.cell_profile(block_len);
  const double norm = omega.lpNorm<1>();
  Eigen::VectorXd pi = Eigen::VectorXd::Zero(periods);
  for (const int start : starts) {
    for (int s = 0; s < block_len; ++s) {
      pi[start - 1 + s] += omega[s];
    }
  }
  pi /= static_cast<double>(starts.size()) * norm;
  return pi;
}

}  // namespace detail

// Observation weights of the block bootstraps: draws b = floor(T/l) uniform
// block starts from {1,...,T-l+1} and spreads each block's taper mass over
// the periods it covers. Nonnegative and summing to one by construction.
inline Eigen::VectorXd block_weights(int periods, int block_len,
                                     const TaperSpec& taper, RngStream& rng) {
  if (block_len < 1 || block_len > periods) {
    fail(errc::invalid_length, "block length must satisfy 1 <= l <= T");
  }
  const int b = periods / block_len;
  std::vector<int> starts(b);
  for (int j = 0; j < b; ++j) {
    starts[j] =
        static_cast<int>(rng.uniform_int(1, periods - block_len + 1));
  }
  return detail::block_weights_from_starts(periods, block_len, taper, starts);
}

// One Exp(1) multiplier per unit, applied to all of the unit's observations.
inline Eigen::VectorXd web_weights(int n_units, RngStream& rng) {
  if (n_units < 1) fail(errc::invalid_argument, "need at least one unit");
  Eigen::VectorXd w(n_units);
  for (int i = 0; i < n_units; ++i) w[i] = rng.exponential();
  return w;
}

enum class BootstrapMethod { pwb, mbb, etbb, web, po };

inline std::string method_name(BootstrapMethod m) {
  switch (m) {
    case BootstrapMethod::pwb: return "pwb";
    case BootstrapMethod::mbb: return "mbb";
    case BootstrapMethod::etbb: return "etbb";
    case BootstrapMethod::web: return "web";
    case BootstrapMethod::po: return "po";
  }
  return "?";
}

namespace detail {

// Weighted-criterion bootstrap engine: per replicate, build one weight per
// observation (by time for block methods, by unit for WEB) and refit.
template <typename WeightsOf>
BootstrapResult run_weighted_bootstrap(const PanelDataset& data, double tau,
                                       const PartitionScheme& scheme,
                                       int reps, std::uint64_t seed,
                                       std::uint64_t salt,
                                       const SolverOptions& opts, int threads,
                                       const QuantileFit* base_fit,
                                       WeightsOf&& weights_of) {
  const int N = data.n_units();
  const int T = data.n_periods();
  const int p = data.n_covariates();
  QuantileFit base = base_fit ? *base_fit : fit_feqr(data, tau, opts);

  auto make_replicate = [&](RngStream& rng) -> Eigen::VectorXd {
    Eigen::VectorXd obs_w(data.n_obs());
    weights_of(rng, obs_w);
    PanelRows rows = build_rows(data, &obs_w, nullptr);
    auto sol = solve_qr_lp(rows, tau, opts.tol, opts.max_iter);
    if (!sol.converged) {
      fail(errc::no_convergence, "bootstrap replicate did not converge");
    }
    return sol.theta.head(p);
  };
  return run_replicates(tau, p, reps, seed, salt, threads, std::move(base),
                        scheme, make_replicate);
}

inline BootstrapResult run_block_bootstrap(const PanelDataset& data,
                                           double tau, int block_len,
                                           int reps, std::uint64_t seed,
                                           const TaperSpec& taper,
                                           const SolverOptions& opts,
                                           int threads,
                                           const QuantileFit* base_fit) {
  const int N = data.n_units();
  const int T = data.n_periods();
  return run_weighted_bootstrap(
      data, tau, make_partition(T, block_len), reps, seed, kSaltBlock, opts,
      threads, base_fit, [&](RngStream& rng, Eigen::VectorXd& obs_w) {
        const Eigen::VectorXd pi = block_weights(T, block_len, taper, rng);
        for (int i = 0; i < N; ++i) {
          for (int t = 0; t < T; ++t) obs_w[data.flat_index(i, t)] = pi[t];
        }
      });
}

}  // namespace detail

// Comparison bootstraps run through the weighted FE-QR criterion: MBB and
// ETBB reweight by time (block coverage, rectangular vs triangular taper),
// WEB by unit. block_len is ignored for WEB. Same replicate-stream and
// failure policy as run_pwb.
inline BootstrapResult run_alt_bootstrap(BootstrapMethod method,
                                         const PanelDataset& data, double tau,
                                         int block_len, int reps,
                                         std::uint64_t seed,
                                         const SolverOptions& opts = {},
                                         int threads = 1,
                                         const QuantileFit* base_fit = nullptr) {
  const int N = data.n_units();
  const int T = data.n_periods();
  switch (method) {
    case BootstrapMethod::mbb:
      return detail::run_block_bootstrap(
          data, tau, block_len, reps, seed,
          TaperSpec{TaperSpec::Shape::rectangular}, opts, threads, base_fit);
    case BootstrapMethod::etbb:
      return detail::run_block_bootstrap(
          data, tau, block_len, reps, seed,
          TaperSpec{TaperSpec::Shape::triangular}, opts, threads, base_fit);
    case BootstrapMethod::web:
      return detail::run_weighted_bootstrap(
          data, tau, make_partition(T, T), reps, seed, detail::kSaltWeb, opts,
          threads, base_fit, [&](RngStream& rng, Eigen::VectorXd& obs_w) {
            const Eigen::VectorXd pi = web_weights(N, rng);
            for (int i = 0; i < N; ++i) {
              for (int t = 0; t < T; ++t) {
                obs_w[data.flat_index(i, t)] = pi[i];
              }
            }
          });
    default:
      fail(errc::invalid_argument,
           "run_alt_bootstrap handles mbb, etbb and web only");
  }
}

}  // namespace panelqboot
