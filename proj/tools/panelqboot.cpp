// Command-line front end: fit, bootstrap, select-length and simulate
// subcommands over the CSV panel format `unit,time,y,x1,...,xp`.
//
// Exit codes: 0 success, 2 input/validation error, 3 numerical failure.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "panelqboot/panelqboot.hpp"
#include "report_json.hpp"

namespace pqb = panelqboot;
using pqbtool::Json;

namespace {

constexpr std::uint64_t kDefaultSeed = 20250416ull;

pqb::PanelDataset load_panel(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    pqb::fail(pqb::errc::invalid_argument, "cannot open input file: " + path);
  }
  return pqb::PanelDataset::load_csv(in);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    pqb::fail(pqb::errc::invalid_argument, "cannot open output file: " + path);
  }
  out << content;
}

Eigen::MatrixXd load_numeric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    pqb::fail(pqb::errc::invalid_argument, "cannot open file: " + path);
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    for (auto field : pqb::detail::split_csv_line(line)) {
      row.push_back(pqb::detail::parse_double_cell(field, line_no, row.size()));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      pqb::fail(pqb::errc::invalid_argument,
                path + ": ragged rows are not allowed");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    pqb::fail(pqb::errc::invalid_argument, path + ": no numeric rows");
  }
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.front().size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
    }
  }
  return m;
}

int env_threads_fallback() {
  if (const char* env = std::getenv("PANELQBOOT_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push(v[i]);
  return arr;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push(m(i, j));
    rows.push(std::move(row));
  }
  return rows;
}

Json fit_json(const pqb::QuantileFit& fit, const pqb::PanelDataset& data) {
  Json names = Json::array();
  for (const auto& n : data.x_names()) names.push(n);
  Json units = Json::array();
  for (const auto& u : data.unit_ids()) units.push(u);
  return Json::object()
      .set("tau", fit.tau)
      .set("n_units", static_cast<std::int64_t>(data.n_units()))
      .set("n_periods", static_cast<std::int64_t>(data.n_periods()))
      .set("n_covariates", static_cast<std::int64_t>(data.n_covariates()))
      .set("covariates", std::move(names))
      .set("beta", vector_json(fit.beta))
      .set("unit_ids", std::move(units))
      .set("alpha", vector_json(fit.alpha))
      .set("objective", fit.objective)
      .set("iterations", static_cast<std::int64_t>(fit.iterations))
      .set("duality_gap", fit.duality_gap);
}

Json ci_json(const pqb::ConfidenceInterval& ci) {
  return Json::object()
      .set("coordinate", static_cast<std::int64_t>(ci.coordinate))
      .set("lower", ci.lower)
      .set("upper", ci.upper)
      .set("level", ci.level);
}

Json selection_json(const pqb::SelectionDiagnostics& sel) {
  Json per_unit = Json::array();
  for (int l : sel.per_unit) per_unit.push(static_cast<std::int64_t>(l));
  Json lhs = Json::array();
  for (double v : sel.lhs_curve) lhs.push(v);
  Json rhs_units = Json::array();
  for (double v : sel.rhs_per_unit) rhs_units.push(v);
  return Json::object()
      .set("l_hat", static_cast<std::int64_t>(sel.l_hat))
      .set("per_unit", std::move(per_unit))
      .set("kernel", sel.kernel.name())
      .set("bandwidth", sel.kernel.bandwidth)
      .set("search_cap", static_cast<std::int64_t>(sel.search_cap))
      .set("dependence_trace", sel.rhs_estimate.trace())
      .set("dependence_matrix", matrix_json(sel.rhs_estimate))
      .set("negative_dependence", sel.negative_dependence)
      .set("lhs_curve", std::move(lhs))
      .set("rhs_per_unit", std::move(rhs_units));
}

const char* kConservativeWarning =
    "negative serial dependence dominates the estimated score "
    "autocovariances; cell length falls back to 1, the bootstrap variance "
    "approaches its independence form, and the resulting inference should "
    "be read as conservative";

std::string small_n_web_warning(int n_units) {
  return "web draws one weight per unit; with only " +
         std::to_string(n_units) +
         " units there is little cross-sectional variation to resample and "
         "intervals may be unreliable";
}

struct SolverFlags {
  double tol = 1e-8;
  int max_iter = 50;

  void attach(CLI::App* cmd) {
    cmd->add_option("--tol", tol, "relative duality-gap tolerance");
    cmd->add_option("--max-iter", max_iter, "solver iteration cap");
  }
  pqb::SolverOptions options() const {
    pqb::SolverOptions o;
    o.tol = tol;
    o.max_iter = max_iter;
    return o;
  }
};

struct KernelFlags {
  std::string shape;       // empty = module default
  double bandwidth = 0.0;  // 0 = module default
  int max_length = 25;

  void attach(CLI::App* cmd) {
    cmd->add_option("--kernel", shape, "lag kernel: triangular|rectangular")
        ->check(CLI::IsMember({"triangular", "rectangular"}));
    cmd->add_option("--bandwidth", bandwidth,
                    "kernel bandwidth in lags (0 = 5*ceil(T^(1/3)))");
    cmd->add_option("--max-length", max_length, "selection search cap L");
  }
  pqb::KernelSpec kernel(int periods) const {
    pqb::KernelSpec k = pqb::default_kernel(periods);
    if (!shape.empty()) {
      k.shape = shape == "rectangular" ? pqb::KernelSpec::Shape::rectangular
                                       : pqb::KernelSpec::Shape::triangular;
    }
    if (bandwidth > 0.0) k.bandwidth = bandwidth;
    return k;
  }
};

// ---------------------------------------------------------------- fit ----

struct FitArgs {
  std::string input, out;
  double tau = 0.5;
  SolverFlags solver;
};

void run_fit(const FitArgs& a) {
  const pqb::PanelDataset data = load_panel(a.input);
  const pqb::QuantileFit fit = pqb::fit_feqr(data, a.tau, a.solver.options());
  Json doc = Json::object()
                 .set("command", "fit")
                 .set("config", Json::object()
                                    .set("input", a.input)
                                    .set("tau", a.tau)
                                    .set("tol", a.solver.tol)
                                    .set("max_iter", static_cast<std::int64_t>(
                                                         a.solver.max_iter)))
                 .set("fit", fit_json(fit, data));
  const std::string text = doc.dump();
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file(a.out, text);
  }
}

// ---------------------------------------------------------- bootstrap ----

struct BootstrapArgs {
  std::string input, out;
  double tau = 0.5;
  std::string method = "pwb";
  int reps = 400;
  std::string length = "auto";
  double level = 0.90;
  std::uint64_t seed = kDefaultSeed;
  int threads = 0;  // 0 = env fallback
  std::string restrict_R, restrict_r;
  SolverFlags solver;
  KernelFlags kernel;
};

void run_bootstrap(const BootstrapArgs& a) {
  const pqb::PanelDataset data = load_panel(a.input);
  const int threads = a.threads > 0 ? a.threads : env_threads_fallback();
  const pqb::SolverOptions opts = a.solver.options();
  const pqb::QuantileFit fit = pqb::fit_feqr(data, a.tau, opts);

  std::vector<std::string> warnings;
  std::optional<pqb::SelectionDiagnostics> selection;
  int cell_len = 0;  // unused for the plug-in method
  if (a.method != "po") {
    if (a.length == "auto") {
      const Eigen::MatrixXd xc =
          pqb::centered_regressors(data, pqb::CenteringMode::demean);
      selection = pqb::select_length_per_unit(
          fit, xc, a.kernel.kernel(data.n_periods()), a.kernel.max_length);
      cell_len = selection->l_hat;
      if (selection->negative_dependence) {
        warnings.push_back(kConservativeWarning);
      }
    } else {
      try {
        cell_len = std::stoi(a.length);
      } catch (...) {
        pqb::fail(pqb::errc::invalid_argument,
                  "--length must be `auto` or a positive integer");
      }
    }
  }

  const pqb::KernelSpec resolved_kernel = a.kernel.kernel(data.n_periods());
  Json doc = Json::object().set("command", "bootstrap");
  Json config = Json::object()
                    .set("input", a.input)
                    .set("tau", a.tau)
                    .set("method", a.method)
                    .set("reps", static_cast<std::int64_t>(a.reps))
                    .set("length", a.length)
                    .set("level", a.level)
                    .set("seed", a.seed)
                    .set("tol", a.solver.tol)
                    .set("max_iter", static_cast<std::int64_t>(a.solver.max_iter))
                    .set("kernel", resolved_kernel.name())
                    .set("bandwidth", resolved_kernel.bandwidth)
                    .set("max_length", static_cast<std::int64_t>(a.kernel.max_length));
  doc.set("config", std::move(config));
  doc.set("fit", fit_json(fit, data));

  pqb::CovarianceEstimate cov;
  Json boot = Json::object().set("method", a.method);
  if (a.method == "po") {
    cov = pqb::powell_variance(fit, data);
  } else {
    pqb::BootstrapResult result;
    if (a.method == "pwb") {
      result = pqb::run_pwb(data, a.tau, cell_len, a.reps, a.seed, opts, {},
                            threads, &fit);
    } else {
      const auto method = a.method == "mbb"   ? pqb::BootstrapMethod::mbb
                          : a.method == "etbb" ? pqb::BootstrapMethod::etbb
                                                : pqb::BootstrapMethod::web;
      if (method == pqb::BootstrapMethod::web && data.n_units() < 10) {
        warnings.push_back(small_n_web_warning(data.n_units()));
      }
      result = pqb::run_alt_bootstrap(method, data, a.tau, cell_len, a.reps,
                                      a.seed, opts, threads, &fit);
    }
    for (const auto& w : result.warnings) warnings.push_back(w);
    cov = pqb::boot_covariance(result.beta_star, fit.beta);
    boot.set("reps", static_cast<std::int64_t>(result.reps))
        .set("failures", static_cast<std::int64_t>(result.failures))
        .set("cell_length", static_cast<std::int64_t>(result.scheme.cell_len));
    Json ci_p = Json::array();
    for (int j = 0; j < data.n_covariates(); ++j) {
      ci_p.push(ci_json(pqb::percentile_ci(result.beta_star, a.level, j)));
    }
    boot.set("ci_percentile", std::move(ci_p));
  }
  boot.set("sigma", matrix_json(cov.sigma));
  Json ci_se = Json::array();
  for (int j = 0; j < data.n_covariates(); ++j) {
    ci_se.push(ci_json(pqb::se_ci(fit.beta, cov, a.level, j)));
  }
  boot.set("ci_se", std::move(ci_se));
  doc.set("bootstrap", std::move(boot));

  if (selection.has_value()) doc.set("selection", selection_json(*selection));

  if (!a.restrict_R.empty()) {
    if (a.restrict_r.empty()) {
      pqb::fail(pqb::errc::invalid_argument,
                "--restrict needs both R.csv and r.csv");
    }
    const Eigen::MatrixXd R = load_numeric_csv(a.restrict_R);
    const Eigen::MatrixXd r_mat = load_numeric_csv(a.restrict_r);
    const Eigen::VectorXd r =
        Eigen::Map<const Eigen::VectorXd>(r_mat.data(), r_mat.size());
    const pqb::WaldResult w = pqb::wald_test(R, r, fit.beta, cov);
    doc.set("wald", Json::object()
                        .set("statistic", w.statistic)
                        .set("df", static_cast<std::int64_t>(w.df))
                        .set("p_value", w.p_value));
  }

  Json warn = Json::array();
  for (const auto& w : warnings) warn.push(w);
  doc.set("warnings", std::move(warn));

  const std::string text = doc.dump();
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file(a.out, text);
  }
}

// ------------------------------------------------------- select-length ----

struct SelectArgs {
  std::string input, out;
  double tau = 0.5;
  std::string centering = "demean";
  SolverFlags solver;
  KernelFlags kernel;
};

void run_select_length(const SelectArgs& a) {
  const pqb::PanelDataset data = load_panel(a.input);
  const pqb::QuantileFit fit = pqb::fit_feqr(data, a.tau, a.solver.options());
  const auto mode = a.centering == "density_weighted"
                        ? pqb::CenteringMode::density_weighted
                        : pqb::CenteringMode::demean;
  const Eigen::MatrixXd xc = pqb::centered_regressors(data, mode, &fit);
  const pqb::KernelSpec kernel = a.kernel.kernel(data.n_periods());
  const pqb::SelectionDiagnostics sel =
      pqb::select_length_per_unit(fit, xc, kernel, a.kernel.max_length);
  const int closed_form = pqb::select_length_closed_form(fit, kernel);

  Json doc = Json::object()
                 .set("command", "select-length")
                 .set("config", Json::object()
                                    .set("input", a.input)
                                    .set("tau", a.tau)
                                    .set("centering", a.centering)
                                    .set("kernel", kernel.name())
                                    .set("bandwidth", kernel.bandwidth)
                                    .set("max_length",
                                         static_cast<std::int64_t>(
                                             a.kernel.max_length)))
                 .set("selection", selection_json(sel))
                 .set("l_hat_closed_form",
                      static_cast<std::int64_t>(closed_form));
  Json warn = Json::array();
  if (sel.negative_dependence) warn.push(kConservativeWarning);
  doc.set("warnings", std::move(warn));
  const std::string text = doc.dump();
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file(a.out, text);
  }
}

// ------------------------------------------------------------ simulate ----

struct SimulateArgs {
  std::string config_path;
  std::string out_prefix = "simulation";
  // Flag overrides; negative/empty means "not set".
  int n_units = -1, n_periods = -1, mc_reps = -1, reps = -1, burn_in = -1;
  double tau = -1.0, zeta = -1.0, level = -1.0;
  std::string alpha_mode, innovation, methods, length;
  std::int64_t seed = -1;
  int threads = 0;
  int max_length = -1;
};

pqb::BootstrapMethod parse_method(const std::string& name) {
  if (name == "pwb") return pqb::BootstrapMethod::pwb;
  if (name == "mbb") return pqb::BootstrapMethod::mbb;
  if (name == "etbb") return pqb::BootstrapMethod::etbb;
  if (name == "web") return pqb::BootstrapMethod::web;
  if (name == "po") return pqb::BootstrapMethod::po;
  pqb::fail(pqb::errc::invalid_argument, "unknown method: " + name);
}

pqb::SimConfig simulate_config(const SimulateArgs& a) {
  pqb::SimConfig cfg;
  cfg.seed = kDefaultSeed;
  if (!a.config_path.empty()) {
    std::ifstream in(a.config_path);
    if (!in) {
      pqb::fail(pqb::errc::invalid_argument,
                "cannot open config file: " + a.config_path);
    }
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      pqb::fail(pqb::errc::invalid_argument,
                std::string("config parse error: ") + e.what());
    }
    auto get_int = [&](const char* k, int& dst) {
      if (j.contains(k)) dst = j.at(k).get<int>();
    };
    auto get_double = [&](const char* k, double& dst) {
      if (j.contains(k)) dst = j.at(k).get<double>();
    };
    get_int("n_units", cfg.n_units);
    get_int("n_periods", cfg.n_periods);
    get_double("tau", cfg.tau);
    get_double("zeta", cfg.zeta);
    if (j.contains("alpha_mode")) {
      cfg.alpha_mode = j.at("alpha_mode").get<std::string>() == "gaussian"
                           ? pqb::AlphaMode::gaussian
                           : pqb::AlphaMode::i_over_n;
    }
    if (j.contains("innovation")) {
      cfg.innovation = j.at("innovation").get<std::string>() == "t3"
                           ? pqb::Innovation::t3
                           : pqb::Innovation::normal;
    }
    get_double("rho1_u", cfg.rho1_u);
    get_double("rho2_u", cfg.rho2_u);
    get_double("rho1_e", cfg.rho1_e);
    get_double("rho2_e", cfg.rho2_e);
    get_int("burn_in", cfg.burn_in);
    get_int("mc_reps", cfg.mc_reps);
    get_int("bootstrap_reps", cfg.bootstrap_reps);
    get_double("level", cfg.level);
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const auto& m : j.at("methods")) {
        cfg.methods.push_back(parse_method(m.get<std::string>()));
      }
    }
    get_int("fixed_cell_len", cfg.fixed_cell_len);
    get_int("max_cell_len", cfg.max_cell_len);
    get_double("kernel_bandwidth", cfg.kernel_bandwidth);
    if (j.contains("kernel_shape")) {
      cfg.kernel_shape =
          j.at("kernel_shape").get<std::string>() == "rectangular"
              ? pqb::KernelSpec::Shape::rectangular
              : pqb::KernelSpec::Shape::triangular;
    }
    get_double("tol", cfg.solver.tol);
    get_int("max_iter", cfg.solver.max_iter);
  }
  // Flags override the file.
  if (a.n_units > 0) cfg.n_units = a.n_units;
  if (a.n_periods > 0) cfg.n_periods = a.n_periods;
  if (a.tau >= 0.0) cfg.tau = a.tau;
  if (a.zeta >= 0.0) cfg.zeta = a.zeta;
  if (!a.alpha_mode.empty()) {
    cfg.alpha_mode = a.alpha_mode == "gaussian" ? pqb::AlphaMode::gaussian
                                                : pqb::AlphaMode::i_over_n;
  }
  if (!a.innovation.empty()) {
    cfg.innovation = a.innovation == "t3" ? pqb::Innovation::t3
                                          : pqb::Innovation::normal;
  }
  if (a.burn_in > 0) cfg.burn_in = a.burn_in;
  if (a.mc_reps > 0) cfg.mc_reps = a.mc_reps;
  if (a.reps > 0) cfg.bootstrap_reps = a.reps;
  if (a.level > 0.0) cfg.level = a.level;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  if (!a.methods.empty()) {
    cfg.methods.clear();
    std::stringstream ss(a.methods);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) cfg.methods.push_back(parse_method(tok));
    }
  }
  if (!a.length.empty()) {
    if (a.length == "auto") {
      cfg.fixed_cell_len = 0;
    } else {
      try {
        cfg.fixed_cell_len = std::stoi(a.length);
      } catch (...) {
        pqb::fail(pqb::errc::invalid_argument,
                  "--length must be `auto` or a positive integer");
      }
    }
  }
  if (a.max_length > 0) cfg.max_cell_len = a.max_length;
  cfg.threads = a.threads > 0 ? a.threads : env_threads_fallback();
  return cfg;
}

Json sim_config_json(const pqb::SimConfig& cfg) {
  Json methods = Json::array();
  for (auto m : cfg.methods) methods.push(pqb::method_name(m));
  // threads and wall clock are execution details, deliberately not embedded:
  // outputs must be identical across worker counts.
  return Json::object()
      .set("n_units", static_cast<std::int64_t>(cfg.n_units))
      .set("n_periods", static_cast<std::int64_t>(cfg.n_periods))
      .set("tau", cfg.tau)
      .set("zeta", cfg.zeta)
      .set("alpha_mode", pqb::alpha_mode_name(cfg.alpha_mode))
      .set("innovation", pqb::innovation_name(cfg.innovation))
      .set("rho1_u", cfg.rho1_u)
      .set("rho2_u", cfg.rho2_u)
      .set("rho1_e", cfg.rho1_e)
      .set("rho2_e", cfg.rho2_e)
      .set("burn_in", static_cast<std::int64_t>(cfg.burn_in))
      .set("mc_reps", static_cast<std::int64_t>(cfg.mc_reps))
      .set("bootstrap_reps", static_cast<std::int64_t>(cfg.bootstrap_reps))
      .set("level", cfg.level)
      .set("seed", cfg.seed)
      .set("methods", std::move(methods))
      .set("fixed_cell_len", static_cast<std::int64_t>(cfg.fixed_cell_len))
      .set("max_cell_len", static_cast<std::int64_t>(cfg.max_cell_len))
      .set("kernel_shape", cfg.kernel().name())
      .set("kernel_bandwidth", cfg.kernel().bandwidth)
      .set("tol", cfg.solver.tol)
      .set("max_iter", static_cast<std::int64_t>(cfg.solver.max_iter));
}

std::string coverage_csv(const pqb::CoverageReport& rep) {
  const char* cols[] = {"po", "mbb", "etbb", "web", "pwb"};
  std::string out =
      "N,T,tau,zeta,alpha_mode,innovation,ci_type,PO,MBB,ETBB,WEB,PWB\n";
  auto row = [&](const char* ci_type, bool percentile) {
    std::string line = std::to_string(rep.config.n_units) + "," +
                       std::to_string(rep.config.n_periods) + "," +
                       pqb::fmt_g17(rep.config.tau) + "," +
                       pqb::fmt_g17(rep.config.zeta) + "," +
                       pqb::alpha_mode_name(rep.config.alpha_mode) + "," +
                       pqb::innovation_name(rep.config.innovation) + "," +
                       ci_type;
    for (const char* name : cols) {
      line += ",";
      for (const auto& [method, cov] : rep.methods) {
        if (pqb::method_name(method) == name) {
          if (percentile && !cov.has_percentile) break;
          line += pqb::fmt_g17(percentile ? cov.coverage_percentile()
                                          : cov.coverage_se());
          break;
        }
      }
    }
    return line + "\n";
  };
  out += row("se_normal", false);
  out += row("percentile", true);
  return out;
}

std::string lhist_csv(const pqb::CoverageReport& rep) {
  std::string out = "l,count\n";
  for (std::size_t l = 1; l < rep.cell_len_hist.size(); ++l) {
    out += std::to_string(l) + "," + std::to_string(rep.cell_len_hist[l]) +
           "\n";
  }
  return out;
}

void run_simulate(const SimulateArgs& a) {
  const pqb::SimConfig cfg = simulate_config(a);
  cfg.validate();
  const pqb::CoverageReport rep = pqb::run_coverage(cfg);

  Json doc = Json::object()
                 .set("command", "simulate")
                 .set("config", sim_config_json(cfg))
                 .set("true_beta", rep.true_beta)
                 .set("completed_reps",
                      static_cast<std::int64_t>(rep.completed_reps))
                 .set("failed_reps", static_cast<std::int64_t>(rep.failed_reps));
  Json methods = Json::array();
  for (const auto& [method, cov] : rep.methods) {
    Json m = Json::object()
                 .set("method", pqb::method_name(method))
                 .set("reps_done", static_cast<std::int64_t>(cov.reps_done))
                 .set("coverage_se", cov.coverage_se())
                 .set("mean_width_se", cov.mean_width_se())
                 .set("replicate_failures",
                      static_cast<std::int64_t>(cov.replicate_failures));
    if (cov.has_percentile) {
      m.set("coverage_percentile", cov.coverage_percentile())
          .set("mean_width_percentile", cov.mean_width_percentile());
    }
    methods.push(std::move(m));
  }
  doc.set("methods", std::move(methods));
  Json hist = Json::array();
  for (std::size_t l = 1; l < rep.cell_len_hist.size(); ++l) {
    hist.push(Json::object()
                  .set("l", static_cast<std::int64_t>(l))
                  .set("count", rep.cell_len_hist[l]));
  }
  doc.set("cell_length_histogram", std::move(hist));
  Json errors = Json::array();
  for (const auto& e : rep.rep_errors) errors.push(e);
  doc.set("rep_errors", std::move(errors));

  write_file(a.out_prefix + "_report.json", doc.dump());
  write_file(a.out_prefix + "_coverage.csv", coverage_csv(rep));
  write_file(a.out_prefix + "_lhist.csv", lhist_csv(rep));
  std::cerr << "simulate: " << rep.completed_reps << "/" << cfg.mc_reps
            << " reps completed in " << rep.wall_clock_sec << "s\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-effects quantile regression with partition-based "
               "bootstrap inference"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "fit the FE-QR model");
  fit_cmd->add_option("--input", fit_args.input, "panel CSV")->required();
  fit_cmd->add_option("--tau", fit_args.tau, "quantile level in (0,1)");
  fit_cmd->add_option("--out", fit_args.out, "output JSON path");
  fit_args.solver.attach(fit_cmd);
  fit_cmd->callback([&] { run_fit(fit_args); });

  BootstrapArgs boot_args;
  auto* boot_cmd =
      app.add_subcommand("bootstrap", "bootstrap confidence intervals");
  boot_cmd->add_option("--input", boot_args.input, "panel CSV")->required();
  boot_cmd->add_option("--tau", boot_args.tau, "quantile level in (0,1)");
  boot_cmd->add_option("--method", boot_args.method,
                       "pwb|mbb|etbb|web|po")
      ->check(CLI::IsMember({"pwb", "mbb", "etbb", "web", "po"}));
  boot_cmd->add_option("--reps", boot_args.reps, "bootstrap replicates");
  boot_cmd->add_option("--length", boot_args.length,
                       "cell/block length, or `auto`");
  boot_cmd->add_option("--level", boot_args.level, "confidence level");
  boot_cmd->add_option("--seed", boot_args.seed, "master seed");
  boot_cmd->add_option("--threads", boot_args.threads,
                       "worker threads (default: PANELQBOOT_THREADS or 1)");
  boot_cmd->add_option("--restrict", boot_args.restrict_R,
                       "restriction matrix R.csv for a Wald test");
  boot_cmd->add_option("--restrict-rhs", boot_args.restrict_r,
                       "restriction vector r.csv");
  boot_cmd->add_option("--out", boot_args.out, "output JSON path");
  boot_args.solver.attach(boot_cmd);
  boot_args.kernel.attach(boot_cmd);
  boot_cmd->callback([&] { run_bootstrap(boot_args); });

  SelectArgs sel_args;
  auto* sel_cmd =
      app.add_subcommand("select-length", "data-driven cell length");
  sel_cmd->add_option("--input", sel_args.input, "panel CSV")->required();
  sel_cmd->add_option("--tau", sel_args.tau, "quantile level in (0,1)");
  sel_cmd->add_option("--centering", sel_args.centering,
                      "demean|density_weighted")
      ->check(CLI::IsMember({"demean", "density_weighted"}));
  sel_cmd->add_option("--out", sel_args.out, "output JSON path");
  sel_args.solver.attach(sel_cmd);
  sel_args.kernel.attach(sel_cmd);
  sel_cmd->callback([&] { run_select_length(sel_args); });

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "coverage experiments");
  sim_cmd->add_option("--config", sim_args.config_path, "JSON config file");
  sim_cmd->add_option("--out-prefix", sim_args.out_prefix,
                      "prefix for report/coverage/histogram files");
  sim_cmd->add_option("--n-units", sim_args.n_units, "N");
  sim_cmd->add_option("--n-periods", sim_args.n_periods, "T");
  sim_cmd->add_option("--tau", sim_args.tau, "quantile level");
  sim_cmd->add_option("--zeta", sim_args.zeta, "location-scale coefficient");
  sim_cmd->add_option("--alpha-mode", sim_args.alpha_mode,
                      "i_over_N|gaussian");
  sim_cmd->add_option("--innovation", sim_args.innovation, "normal|t3");
  sim_cmd->add_option("--burn-in", sim_args.burn_in, "burn-in periods");
  sim_cmd->add_option("--mc-reps", sim_args.mc_reps, "Monte Carlo reps");
  sim_cmd->add_option("--reps", sim_args.reps, "bootstrap replicates");
  sim_cmd->add_option("--level", sim_args.level, "confidence level");
  sim_cmd->add_option("--seed", sim_args.seed, "master seed");
  sim_cmd->add_option("--methods", sim_args.methods,
                      "comma list of po,mbb,etbb,web,pwb");
  sim_cmd->add_option("--length", sim_args.length,
                      "cell length, or `auto` for selection");
  sim_cmd->add_option("--max-length", sim_args.max_length,
                      "selection search cap L");
  sim_cmd->add_option("--threads", sim_args.threads,
                      "worker threads (default: PANELQBOOT_THREADS or 1)");
  sim_cmd->callback([&] { run_simulate(sim_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const pqb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_validation() ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
