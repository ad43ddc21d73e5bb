#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "panelqboot/alt_bootstrap.hpp"
#include "panelqboot/errors.hpp"
#include "panelqboot/feqr.hpp"
#include "panelqboot/inference.hpp"
#include "panelqboot/length_selection.hpp"
#include "panelqboot/panel_data.hpp"
#include "panelqboot/parallel.hpp"
#include "panelqboot/pwb.hpp"
#include "panelqboot/rng.hpp"

namespace panelqboot {

enum class AlphaMode { i_over_n, gaussian };
enum class Innovation { normal, t3 };

inline std::string alpha_mode_name(AlphaMode m) {
  return m == AlphaMode::i_over_n ? "i_over_N" : "gaussian";
}
inline std::string innovation_name(Innovation v) {
  return v == Innovation::normal ? "normal" : "t3";
}

// Stationary variance of an AR(2) process with innovation variance sigma_v2.
inline double sigma_u2(double rho1, double rho2, double sigma_v2) {
  if (!(std::abs(rho2) < 1.0 && rho1 + rho2 < 1.0 && rho2 - rho1 < 1.0)) {
    fail(errc::non_stationary,
         "non-stationary AR(2): rho1=" + fmt_g17(rho1) +
             ", rho2=" + fmt_g17(rho2));
  }
  return (1.0 - rho2) * sigma_v2 /
         ((1.0 + rho2) * (1.0 - rho1 - rho2) * (1.0 + rho1 - rho2));
}

// Innovation variance as used in the panel generator: t3 has variance 3.
inline double innovation_variance(Innovation v) {
  return v == Innovation::normal ? 1.0 : 3.0;
}

// AR(2) series of the given length, zero-initialized with burn_in leading
// steps discarded.
inline Eigen::VectorXd gen_ar2(int periods, double rho1, double rho2,
                               Innovation innovation, int burn_in,
                               RngStream& rng) {
  sigma_u2(rho1, rho2, 1.0);  // stationarity check
  if (burn_in < 0) fail(errc::invalid_argument, "burn_in must be >= 0");
  auto draw = [&]() {
    return innovation == Innovation::normal ? rng.normal() : rng.student_t3();
  };
  double prev1 = 0.0, prev2 = 0.0;
  for (int t = 0; t < burn_in; ++t) {
    const double v = rho1 * prev1 + rho2 * prev2 + draw();
    prev2 = prev1;
    prev1 = v;
  }
  Eigen::VectorXd out(periods);
  for (int t = 0; t < periods; ++t) {
    const double v = rho1 * prev1 + rho2 * prev2 + draw();
    prev2 = prev1;
    prev1 = v;
    out[t] = v;
  }
  return out;
}

struct SimConfig {
  int n_units = 5;
  int n_periods = 200;
  double tau = 0.5;
  double zeta = 0.0;
  AlphaMode alpha_mode = AlphaMode::i_over_n;
  Innovation innovation = Innovation::normal;
  double rho1_u = 0.7, rho2_u = 0.1;
  double rho1_e = 0.7, rho2_e = 0.1;
  int burn_in = 500;
  int mc_reps = 300;
  int bootstrap_reps = 200;
  double level = 0.90;
  std::uint64_t seed = 1;
  std::vector<BootstrapMethod> methods = {
      BootstrapMethod::po, BootstrapMethod::mbb, BootstrapMethod::etbb,
      BootstrapMethod::web, BootstrapMethod::pwb};
  int fixed_cell_len = 0;  // 0 = data-driven selection
  int max_cell_len = 25;   // L
  double kernel_bandwidth = 0.0;              // 0 = module default
  std::optional<KernelSpec::Shape> kernel_shape;  // unset = module default
  int threads = 1;
  SolverOptions solver;

  void validate() const {
    if (n_units < 1 || n_periods < 2) {
      fail(errc::invalid_argument, "need N >= 1 and T >= 2");
    }
    if (!(tau > 0.0 && tau < 1.0)) {
      fail(errc::invalid_argument, "tau must be in (0,1)");
    }
    sigma_u2(rho1_u, rho2_u, 1.0);
    sigma_u2(rho1_e, rho2_e, 1.0);
    if (burn_in < 200) {
      fail(errc::invalid_argument, "burn_in must be >= 200");
    }
    if (mc_reps < 1 || bootstrap_reps < 2) {
      fail(errc::invalid_argument, "mc_reps >= 1 and bootstrap_reps >= 2");
    }
    if (!(level > 0.0 && level < 1.0)) {
      fail(errc::invalid_argument, "level must be in (0,1)");
    }
    if (fixed_cell_len < 0 || fixed_cell_len > n_periods) {
      fail(errc::invalid_length, "fixed cell length out of range");
    }
    if (max_cell_len < 1 || max_cell_len > n_periods) {
      fail(errc::invalid_length, "max cell length out of range");
    }
  }

  KernelSpec kernel() const {
    KernelSpec k = default_kernel(n_periods);
    if (kernel_shape.has_value()) k.shape = *kernel_shape;
    if (kernel_bandwidth > 0.0) k.bandwidth = kernel_bandwidth;
    return k;
  }
};

struct QuantileEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Empirical tau-quantile of a long simulated stationary AR(2) path; used for
// the true slope when the innovation law has no closed-form quantile. The
// standard error comes from 20 block quantiles, which respects the serial
// dependence of the path.
inline QuantileEstimate stationary_quantile_oracle(Innovation innovation,
                                                   double rho1, double rho2,
                                                   double tau,
                                                   std::int64_t n_draws,
                                                   RngStream& rng) {
  if (n_draws < 1000000) {
    fail(errc::invalid_argument, "oracle needs at least 1e6 draws");
  }
  const Eigen::VectorXd path = gen_ar2(static_cast<int>(n_draws), rho1, rho2,
                                       innovation, 1000, rng);
  std::vector<double> sorted(path.data(), path.data() + path.size());
  std::sort(sorted.begin(), sorted.end());
  auto emp_quantile = [&](const std::vector<double>& v) {
    auto k = static_cast<std::size_t>(
        std::ceil(tau * static_cast<double>(v.size())));
    k = std::max<std::size_t>(1, std::min(k, v.size()));
    return v[k - 1];
  };
  QuantileEstimate est;
  est.value = emp_quantile(sorted);

  const int blocks = 20;
  const auto block_len = static_cast<std::int64_t>(n_draws / blocks);
  std::vector<double> block_q(blocks);
  std::vector<double> buf;
  for (int b = 0; b < blocks; ++b) {
    buf.assign(path.data() + b * block_len,
               path.data() + (b + 1) * block_len);
    std::sort(buf.begin(), buf.end());
    block_q[b] = emp_quantile(buf);
  }
  double mean = 0.0;
  for (double v : block_q) mean += v;
  mean /= blocks;
  double var = 0.0;
  for (double v : block_q) var += (v - mean) * (v - mean);
  var /= (blocks - 1);
  est.std_error = std::sqrt(var / blocks);
  return est;
}

// Marginal tau-quantile of the stationary error process; closed form for
// normal innovations, simulated otherwise.
inline double stationary_u_quantile(const SimConfig& cfg) {
  if (cfg.innovation == Innovation::normal) {
    return std::sqrt(sigma_u2(cfg.rho1_u, cfg.rho2_u, 1.0)) *
           normal_quantile(cfg.tau);
  }
  RngStream rng(cfg.seed, 0x74337175u);  // one oracle stream per run
  return stationary_quantile_oracle(cfg.innovation, cfg.rho1_u, cfg.rho2_u,
                                    cfg.tau, 10000000, rng)
      .value;
}

struct GeneratedPanel {
  PanelDataset data;
  double true_beta = 1.0;
};

// Location(-scale) panel DGP: y = alpha_i + x + (1 + zeta x) u with AR(2)
// errors in both x's noise and u. The implied slope at tau is
// 1 + zeta * F^{-1}(tau), with F the stationary law of u; pass it in via
// u_quantile when it is expensive to recompute.
inline GeneratedPanel gen_panel(const SimConfig& cfg, RngStream& rng,
                                std::optional<double> u_quantile = {}) {
  cfg.validate();
  const int N = cfg.n_units;
  const int T = cfg.n_periods;
  std::vector<std::string> unit_ids(N);
  std::vector<std::int64_t> time_start(N, 1);
  int width = 1;
  for (int n = N; n >= 10; n /= 10) ++width;
  for (int i = 0; i < N; ++i) {
    std::string id = std::to_string(i + 1);
    unit_ids[i] = "u" + std::string(width - id.size(), '0') + id;
  }

  Eigen::MatrixXd y(N, T);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(N) * T, 1);
  for (int i = 0; i < N; ++i) {
    const double alpha = cfg.alpha_mode == AlphaMode::i_over_n
                             ? static_cast<double>(i + 1) / N
                             : rng.normal();
    const double z = rng.chi_squared(3);
    const Eigen::VectorXd eps = gen_ar2(T, cfg.rho1_e, cfg.rho2_e,
                                        cfg.innovation, cfg.burn_in, rng);
    const Eigen::VectorXd u = gen_ar2(T, cfg.rho1_u, cfg.rho2_u,
                                      cfg.innovation, cfg.burn_in, rng);
    for (int t = 0; t < T; ++t) {
      const double xit = 0.5 * alpha + z + eps[t];
      x(static_cast<Eigen::Index>(i) * T + t, 0) = xit;
      y(i, t) = alpha + xit + (1.0 + cfg.zeta * xit) * u[t];
    }
  }
  GeneratedPanel out{PanelDataset::from_arrays(std::move(unit_ids),
                                               std::move(time_start),
                                               std::move(y), std::move(x)),
                     1.0};
  if (cfg.zeta != 0.0) {
    const double q =
        u_quantile.has_value() ? *u_quantile : stationary_u_quantile(cfg);
    out.true_beta = 1.0 + cfg.zeta * q;
  }
  return out;
}

struct MethodCoverage {
  int reps_done = 0;       // reps where the method produced intervals
  int covered_percentile = 0;
  int covered_se = 0;
  double width_percentile_sum = 0.0;
  double width_se_sum = 0.0;
  std::int64_t replicate_failures = 0;
  bool has_percentile = true;

  double coverage_percentile() const {
    return reps_done > 0 ? static_cast<double>(covered_percentile) / reps_done
                         : 0.0;
  }
  double coverage_se() const {
    return reps_done > 0 ? static_cast<double>(covered_se) / reps_done : 0.0;
  }
  double mean_width_percentile() const {
    return reps_done > 0 ? width_percentile_sum / reps_done : 0.0;
  }
  double mean_width_se() const {
    return reps_done > 0 ? width_se_sum / reps_done : 0.0;
  }
};

struct CoverageReport {
  SimConfig config;
  double true_beta = 1.0;
  std::vector<std::pair<BootstrapMethod, MethodCoverage>> methods;
  std::vector<std::int64_t> cell_len_hist;  // index l (1-based at [l])
  int completed_reps = 0;
  int failed_reps = 0;
  std::vector<std::string> rep_errors;  // first few messages, for diagnosis
  double wall_clock_sec = 0.0;  // reporting only; not part of file outputs
};

namespace detail {

constexpr std::uint64_t kSaltPanel = 0x70616e00u;
constexpr std::uint64_t kSaltMethodBase = 0x6d740000u;

struct RepOutcome {
  bool ok = false;
  std::string error;
  int cell_len = 0;
  struct PerMethod {
    bool present = false;
    bool has_percentile = false;
    bool cover_pct = false, cover_se = false;
    double width_pct = 0.0, width_se = 0.0;
    int replicate_failures = 0;
  };
  std::vector<PerMethod> per_method;  // indexed like config.methods
};

}  // namespace detail

// Coverage experiment: per repetition, simulate a panel, fit, select the
// cell length, run the requested methods and record whether each interval
// covers the true slope. Reps run in parallel on per-rep derived streams and
// aggregate in rep order, so the report depends only on the master seed.
inline CoverageReport run_coverage(const SimConfig& cfg) {
  cfg.validate();
  CoverageReport report;
  report.config = cfg;
  const double u_quantile =
      cfg.zeta != 0.0 ? stationary_u_quantile(cfg) : 0.0;
  report.true_beta = 1.0 + cfg.zeta * u_quantile;
  report.cell_len_hist.assign(
      static_cast<std::size_t>(
          std::max(cfg.max_cell_len, std::max(cfg.fixed_cell_len, 1))) +
          1,
      0);

  const KernelSpec kernel = cfg.kernel();
  const int n_methods = static_cast<int>(cfg.methods.size());
  std::vector<detail::RepOutcome> outcomes(cfg.mc_reps);

  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(static_cast<std::size_t>(cfg.mc_reps), cfg.threads,
               [&](std::size_t rep) {
    detail::RepOutcome& out = outcomes[rep];
    out.per_method.resize(n_methods);
    try {
      RngStream panel_rng(cfg.seed, detail::kSaltPanel, rep);
      GeneratedPanel gp = gen_panel(cfg, panel_rng, u_quantile);
      const QuantileFit fit = fit_feqr(gp.data, cfg.tau, cfg.solver);

      int cell_len = cfg.fixed_cell_len;
      if (cell_len == 0) {
        const Eigen::MatrixXd xc =
            centered_regressors(gp.data, CenteringMode::demean);
        const SelectionDiagnostics sel =
            select_length_per_unit(fit, xc, kernel, cfg.max_cell_len);
        cell_len = sel.l_hat;
      }
      out.cell_len = cell_len;

      for (int m = 0; m < n_methods; ++m) {
        const BootstrapMethod method = cfg.methods[m];
        auto& pm = out.per_method[m];
        pm.present = true;
        const std::uint64_t mseed =
            derive_stream(cfg.seed, detail::kSaltMethodBase + m, rep);
        if (method == BootstrapMethod::po) {
          const CovarianceEstimate cov = powell_variance(fit, gp.data);
          const ConfidenceInterval ci = se_ci(fit.beta, cov, cfg.level, 0);
          pm.has_percentile = false;
          pm.cover_se = ci.lower <= gp.true_beta && gp.true_beta <= ci.upper;
          pm.width_se = ci.upper - ci.lower;
          continue;
        }
        BootstrapResult boot =
            method == BootstrapMethod::pwb
                ? run_pwb(gp.data, cfg.tau, cell_len, cfg.bootstrap_reps,
                          mseed, cfg.solver, {}, 1, &fit)
                : run_alt_bootstrap(method, gp.data, cfg.tau, cell_len,
                                    cfg.bootstrap_reps, mseed, cfg.solver, 1,
                                    &fit);
        pm.replicate_failures = boot.failures;
        const ConfidenceInterval pct =
            percentile_ci(boot.beta_star, cfg.level, 0);
        const CovarianceEstimate cov =
            boot_covariance(boot.beta_star, fit.beta);
        const ConfidenceInterval sei = se_ci(fit.beta, cov, cfg.level, 0);
        pm.has_percentile = true;
        pm.cover_pct = pct.lower <= gp.true_beta && gp.true_beta <= pct.upper;
        pm.width_pct = pct.upper - pct.lower;
        pm.cover_se = sei.lower <= gp.true_beta && gp.true_beta <= sei.upper;
        pm.width_se = sei.upper - sei.lower;
      }
      out.ok = true;
    } catch (const Error& e) {
      out.ok = false;
      out.error = e.what();
    }
  });

  report.methods.reserve(n_methods);
  for (int m = 0; m < n_methods; ++m) {
    MethodCoverage mc;
    mc.has_percentile = cfg.methods[m] != BootstrapMethod::po;
    report.methods.emplace_back(cfg.methods[m], mc);
  }
  for (const auto& out : outcomes) {
    if (!out.ok) {
      ++report.failed_reps;
      if (report.rep_errors.size() < 5) report.rep_errors.push_back(out.error);
      continue;
    }
    ++report.completed_reps;
    if (out.cell_len < static_cast<int>(report.cell_len_hist.size())) {
      ++report.cell_len_hist[out.cell_len];
    }
    for (int m = 0; m < n_methods; ++m) {
      const auto& pm = out.per_method[m];
      if (!pm.present) continue;
      auto& agg = report.methods[m].second;
      ++agg.reps_done;
      agg.replicate_failures += pm.replicate_failures;
      if (pm.has_percentile) {
        agg.covered_percentile += pm.cover_pct ? 1 : 0;
        agg.width_percentile_sum += pm.width_pct;
      }
      agg.covered_se += pm.cover_se ? 1 : 0;
      agg.width_se_sum += pm.width_se;
    }
  }
  report.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

}  // namespace panelqboot
