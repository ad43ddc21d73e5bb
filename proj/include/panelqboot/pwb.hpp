#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "panelqboot/errors.hpp"
#include "panelqboot/feqr.hpp"
#include "panelqboot/loss.hpp"
#include "panelqboot/panel_data.hpp"
#include "panelqboot/parallel.hpp"
#include "panelqboot/partition.hpp"
#include "panelqboot/rng.hpp"
#include "panelqboot/weight_law.hpp"

namespace panelqboot {

struct BootstrapResult {
  double tau = 0.5;
  int reps = 0;               // requested replicates B
  Eigen::MatrixXd beta_star;  // (B - failures) x p, in replicate order
  QuantileFit base_fit;
  PartitionScheme scheme;
  std::vector<std::uint64_t> seeds;  // per-replicate stream keys (size B)
  int failures = 0;
  std::vector<std::string> warnings;
};

// Bootstrap sample y* = fitted + w * |residual|, one weight per (unit, cell);
// regressors are carried over unchanged.
inline PanelDataset bootstrap_sample(const QuantileFit& fit,
                                     const PanelDataset& data,
                                     const PartitionScheme& scheme,
                                     const Eigen::MatrixXd& weights) {
  const int N = data.n_units();
  const int T = data.n_periods();
  if (scheme.periods != T) {
    fail(errc::dimension_mismatch, "partition does not match panel length");
  }
  if (weights.rows() != N || weights.cols() != scheme.num_cells()) {
    fail(errc::dimension_mismatch,
         "weights must be N x cells = " + std::to_string(N) + " x " +
             std::to_string(scheme.num_cells()));
  }
  Eigen::MatrixXd ystar(N, T);
  for (int i = 0; i < N; ++i) {
    for (int t = 0; t < T; ++t) {
      const double u = fit.residuals(i, t);
      const double fitted = data.y(i, t) - u;
      ystar(i, t) = fitted + weights(i, scheme.cell_of(t)) * std::abs(u);
    }
  }
  return PanelDataset::from_arrays(data.unit_ids(), data.time_starts(),
                                   std::move(ystar), data.x(), data.x_names());
}

namespace detail {

constexpr std::uint64_t kSaltPwb = 0x70776200u;
// MBB and ETBB share one stream: same block starts per replicate, the taper
// is the only difference between the two methods.
constexpr std::uint64_t kSaltBlock = 0x626c6b00u;
constexpr std::uint64_t kSaltWeb = 0x77656200u;

// Replicate engine shared by the partitioned wild bootstrap and the
// observation-weight methods: `reps` independent refits, each seeded by
// (seed, salt, replicate index), assembled in replicate order so results do
// not depend on scheduling. Failed replicates are counted and dropped; more
// than 10% failures aborts the run.
template <typename MakeReplicate>
BootstrapResult run_replicates(double tau, int p, int reps,
                               std::uint64_t seed, std::uint64_t salt,
                               int threads, QuantileFit base,
                               const PartitionScheme& scheme,
                               MakeReplicate&& make_replicate) {
  if (reps < 2) fail(errc::invalid_argument, "need at least 2 replicates");

  BootstrapResult result;
  result.tau = tau;
  result.reps = reps;
  result.base_fit = std::move(base);
  result.scheme = scheme;
  result.seeds.resize(reps);

  Eigen::MatrixXd rows_buf(reps, p);
  std::vector<char> ok(reps, 0);

  parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
    const std::uint64_t key = derive_stream(seed, salt, r);
    result.seeds[r] = key;
    RngStream rng(key);
    try {
      rows_buf.row(static_cast<Eigen::Index>(r)) =
          make_replicate(rng).transpose();
      ok[r] = 1;
    } catch (const Error&) {
      ok[r] = 0;
    }
  });

  int n_ok = 0;
  for (int r = 0; r < reps; ++r) n_ok += ok[r];
  result.failures = reps - n_ok;
  if (result.failures * 10 > reps) {
    fail(errc::bootstrap_failed,
         std::to_string(result.failures) + " of " + std::to_string(reps) +
             " bootstrap replicates failed to converge");
  }
  if (result.failures * 100 > reps) {
    result.warnings.push_back(
        "more than 1% of bootstrap replicates failed (" +
        std::to_string(result.failures) + "/" + std::to_string(reps) + ")");
  }
  result.beta_star.resize(n_ok, p);
  int row = 0;
  for (int r = 0; r < reps; ++r) {
    if (ok[r]) result.beta_star.row(row++) = rows_buf.row(r);
  }
  return result;
}

}  // namespace detail

// Partitioned wild bootstrap: B refits on y* = fitted + w|u_hat| with one
// weight per (unit, cell). Replicate r draws from a stream derived from
// (seed, r), so results are bitwise reproducible under any thread count. A
// nonempty tail cell receives its own independent weight.
inline BootstrapResult run_pwb(const PanelDataset& data, double tau,
                               int cell_len, int reps, std::uint64_t seed,
                               const SolverOptions& opts = {},
                               const std::optional<WeightLaw>& law = {},
                               int threads = 1,
                               const QuantileFit* base_fit = nullptr) {
  const WeightLaw w_law = law.value_or(two_point_law(tau));
  validate_weight_law(w_law);
  if (std::abs(w_law.tau - tau) > 1e-12) {
    fail(errc::invalid_weight_law, "weight law targets a different tau");
  }
  const PartitionScheme scheme = make_partition(data.n_periods(), cell_len);

  QuantileFit base = base_fit ? *base_fit : fit_feqr(data, tau, opts);

  const int N = data.n_units();
  const int T = data.n_periods();
  const int p = data.n_covariates();
  const int cells = scheme.num_cells();

  // Hot path: share the design across replicates, rebuild only y*.
  const detail::PanelRows shared_rows =
      detail::build_rows(data, nullptr, nullptr);
  Eigen::MatrixXd fitted(N, T), abs_resid(N, T);
  for (int i = 0; i < N; ++i) {
    for (int t = 0; t < T; ++t) {
      fitted(i, t) = data.y(i, t) - base.residuals(i, t);
      abs_resid(i, t) = std::abs(base.residuals(i, t));
    }
  }

  auto make_replicate = [&](RngStream& rng) -> Eigen::VectorXd {
    detail::PanelRows local = shared_rows;
    const Eigen::MatrixXd w = draw_weights(w_law, N, cells, rng);
    for (int i = 0; i < N; ++i) {
      for (int t = 0; t < T; ++t) {
        local.y[data.flat_index(i, t)] =
            fitted(i, t) + w(i, scheme.cell_of(t)) * abs_resid(i, t);
      }
    }
    auto sol = detail::solve_qr_lp(local, tau, opts.tol, opts.max_iter);
    if (!sol.converged) {
      fail(errc::no_convergence, "bootstrap replicate did not converge");
    }
    return sol.theta.head(p);
  };

  return detail::run_replicates(tau, p, reps, seed, detail::kSaltPwb, threads,
                                std::move(base), scheme, make_replicate);
}

// Exact conditional variance of the scaled bootstrap score at theta_hat:
//   (1/N) sum_i tau(1-tau)/T sum_cells (sum_s x_checked)(sum_s x_checked)'.
// Within a cell the shared weight makes score terms perfectly dependent, so
// cell sums enter as blocks; across cells terms are independent.
inline Eigen::MatrixXd conditional_score_variance(
    const QuantileFit& fit, const PartitionScheme& scheme,
    const Eigen::MatrixXd& x_checked) {
  const int N = static_cast<int>(fit.residuals.rows());
  const int T = static_cast<int>(fit.residuals.cols());
  const auto p = x_checked.cols();
  if (scheme.periods != T ||
      x_checked.rows() != static_cast<Eigen::Index>(N) * T) {
    fail(errc::dimension_mismatch,
         "x_checked must be (N*T) x p and match the partition");
  }
  const double tau = fit.tau;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd cell_sum(p);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < scheme.num_cells(); ++j) {
      cell_sum.setZero();
      const int begin = scheme.cell_begin(j);
      for (int s = 0; s < scheme.cell_size(j); ++s) {
        cell_sum +=
            x_checked.row(static_cast<Eigen::Index>(i) * T + begin + s);
      }
      out.noalias() += cell_sum * cell_sum.transpose();
    }
  }
  out *= tau * (1.0 - tau) / (static_cast<double>(N) * T);
  return out;
}

}  // namespace panelqboot
