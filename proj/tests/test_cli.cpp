#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

// End-to-end tests of the command-line tool; each case runs the built binary
// against files in a scratch directory.

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(PQB_CLI_PATH) + " " + args + " 2>&1";
  RunResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return res;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof(buf), pipe)) {
    res.output.append(buf, n);
  }
  const int status = pclose(pipe);
  res.exit_code = WEXITSTATUS(status);
  return res;
}

std::string scratch_dir() {
  static std::string dir = [] {
    std::string tmpl = "/tmp/pqb_cli_XXXXXX";
    char* made = mkdtemp(tmpl.data());
    return std::string(made ? made : "/tmp");
  }();
  return dir;
}

std::string write_scratch(const std::string& name, const std::string& text) {
  const std::string path = scratch_dir() + "/" + name;
  std::ofstream out(path);
  out << text;
  return path;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 3 units, 40 periods; a fixed recurrence keeps the file reproducible
// without a library dependency in the test.
std::string demo_panel_csv() {
  std::string csv = "unit,time,y,x1\n";
  double state = 0.37;
  auto next = [&state]() {
    state = std::fmod(state * 997.0 + 0.1234567, 1.0);
    return state - 0.5;
  };
  for (int i = 0; i < 3; ++i) {
    double u = 0.0;
    for (int t = 0; t < 40; ++t) {
      const double x = next() + 0.1 * (i + 1);
      u = 0.6 * u + next();
      const double y = 0.5 * (i + 1) + 2.0 * x + u;
      csv += "u" + std::to_string(i + 1) + "," + std::to_string(t + 1) + "," +
             std::to_string(y) + "," + std::to_string(x) + "\n";
    }
  }
  return csv;
}

}  // namespace

TEST(Cli, FitWritesReport) {
  const std::string input = write_scratch("panel.csv", demo_panel_csv());
  const std::string out = scratch_dir() + "/fit.json";
  const auto res = run_cli("fit --input " + input + " --tau 0.5 --out " + out);
  ASSERT_EQ(res.exit_code, 0) << res.output;
  const std::string report = read_file(out);
  EXPECT_NE(report.find("\"beta\""), std::string::npos);
  EXPECT_NE(report.find("\"alpha\""), std::string::npos);
  EXPECT_NE(report.find("\"objective\""), std::string::npos);
}

TEST(Cli, MalformedCsvExitsTwoWithRowMessage) {
  const std::string input = write_scratch(
      "bad.csv",
      "unit,time,y,x1\nA,1,1.0,0.5\nA,2,oops,0.5\nB,1,1,1\nB,2,1,1\n");
  const auto res = run_cli("fit --input " + input + " --tau 0.5");
  EXPECT_EQ(res.exit_code, 2);
  EXPECT_NE(res.output.find("row 3"), std::string::npos) << res.output;
}

TEST(Cli, BadTauExitsTwo) {
  const std::string input = write_scratch("panel.csv", demo_panel_csv());
  const auto res = run_cli("fit --input " + input + " --tau 1.5");
  EXPECT_EQ(res.exit_code, 2);
  EXPECT_NE(res.output.find("tau must be in (0,1)"), std::string::npos)
      << res.output;
}

TEST(Cli, MissingFileExitsTwo) {
  const auto res = run_cli("fit --input /nonexistent/panel.csv");
  EXPECT_EQ(res.exit_code, 2);
}

TEST(Cli, BootstrapAutoLengthReportsSelectionAndBothCis) {
  const std::string input = write_scratch("panel.csv", demo_panel_csv());
  const std::string out = scratch_dir() + "/boot.json";
  const auto res = run_cli("bootstrap --input " + input +
                           " --tau 0.5 --method pwb --reps 50 --length auto "
                           "--level 0.90 --seed 7 --out " +
                           out);
  ASSERT_EQ(res.exit_code, 0) << res.output;
  const std::string report = read_file(out);
  EXPECT_NE(report.find("\"l_hat\""), std::string::npos);
  EXPECT_NE(report.find("\"ci_percentile\""), std::string::npos);
  EXPECT_NE(report.find("\"ci_se\""), std::string::npos);
  EXPECT_NE(report.find("\"sigma\""), std::string::npos);
  EXPECT_NE(report.find("\"seed\": 7"), std::string::npos);
}

TEST(Cli, BootstrapReplayIsByteIdentical) {
  const std::string input = write_scratch("panel.csv", demo_panel_csv());
  const std::string out1 = scratch_dir() + "/replay1.json";
  const std::string out2 = scratch_dir() + "/replay2.json";
  const std::string args = "bootstrap --input " + input +
                           " --tau 0.5 --method pwb --reps 60 --length 5 "
                           "--seed 99 --level 0.9 --out ";
  ASSERT_EQ(run_cli(args + out1).exit_code, 0);
  ASSERT_EQ(run_cli(args + out2 + " --threads 4").exit_code, 0);
  const std::string a = read_file(out1);
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, read_file(out2));
}

TEST(Cli, WebOnTinyPanelWarnsAboutCrossSection) {
  const std::string input = write_scratch("panel.csv", demo_panel_csv());
  const std::string out = scratch_dir() + "/web.json";
  const auto res = run_cli("bootstrap --input " + input +
                           " --tau 0.5 --method web --reps 40 --length 4 "
                           "--seed 3 --out " +
                           out);
  ASSERT_EQ(res.exit_code, 0) << res.output;
  const std::string report = read_file(out);
  EXPECT_NE(report.find("cross-sectional variation"), std::string::npos);
}

TEST(Cli, PowellMethodSkipsResampling) {
  const std::string input = write_scratch("panel.csv", demo_panel_csv());
  const std::string out = scratch_dir() + "/po.json";
  const auto res = run_cli("bootstrap --input " + input +
                           " --tau 0.5 --method po --out " + out);
  ASSERT_EQ(res.exit_code, 0) << res.output;
  const std::string report = read_file(out);
  EXPECT_NE(report.find("\"ci_se\""), std::string::npos);
  EXPECT_EQ(report.find("\"ci_percentile\""), std::string::npos);
}

TEST(Cli, WaldRestrictionOutput) {
  const std::string input = write_scratch("panel.csv", demo_panel_csv());
  const std::string rmat = write_scratch("R.csv", "1\n");
  const std::string rvec = write_scratch("r.csv", "2.0\n");
  const std::string out = scratch_dir() + "/wald.json";
  const auto res = run_cli("bootstrap --input " + input +
                           " --tau 0.5 --method pwb --reps 50 --length 4 "
                           "--seed 5 --restrict " +
                           rmat + " --restrict-rhs " + rvec + " --out " + out);
  ASSERT_EQ(res.exit_code, 0) << res.output;
  const std::string report = read_file(out);
  EXPECT_NE(report.find("\"wald\""), std::string::npos);
  EXPECT_NE(report.find("\"p_value\""), std::string::npos);
}

TEST(Cli, SelectLengthRespectsCap) {
  const std::string input = write_scratch("panel.csv", demo_panel_csv());
  const auto res = run_cli("select-length --input " + input +
                           " --tau 0.5 --max-length 3");
  ASSERT_EQ(res.exit_code, 0) << res.output;
  const auto pos = res.output.find("\"l_hat\": ");
  ASSERT_NE(pos, std::string::npos);
  const int l_hat = std::atoi(res.output.c_str() + pos + 9);
  EXPECT_GE(l_hat, 1);
  EXPECT_LE(l_hat, 3);
  EXPECT_NE(res.output.find("\"l_hat_closed_form\""), std::string::npos);
  EXPECT_NE(res.output.find("\"dependence_trace\""), std::string::npos);
}

TEST(Cli, SimulateSmokeRunWritesAllOutputs) {
  const std::string prefix = scratch_dir() + "/sim";
  const auto res = run_cli(
      "simulate --n-units 3 --n-periods 24 --mc-reps 2 --reps 25 "
      "--methods po,pwb --seed 11 --max-length 4 --out-prefix " +
      prefix);
  ASSERT_EQ(res.exit_code, 0) << res.output;
  const std::string report = read_file(prefix + "_report.json");
  EXPECT_NE(report.find("\"coverage_se\""), std::string::npos);
  const std::string coverage = read_file(prefix + "_coverage.csv");
  EXPECT_NE(coverage.find("ci_type"), std::string::npos);
  const std::string hist = read_file(prefix + "_lhist.csv");
  EXPECT_NE(hist.find("l,count"), std::string::npos);
}

TEST(Cli, SimulateRejectsNonStationaryRhos) {
  const std::string cfg = write_scratch("bad.cfg", R"({
  "n_units": 2, "n_periods": 20, "mc_reps": 1, "bootstrap_reps": 10,
  "rho1_u": 0.95, "rho2_u": 0.1, "methods": ["pwb"]
})");
  const auto res = run_cli("simulate --config " + cfg +
                           " --out-prefix /tmp/pqb_bad");
  EXPECT_EQ(res.exit_code, 2);
  EXPECT_NE(res.output.find("non-stationary"), std::string::npos)
      << res.output;
}

TEST(Cli, SimulateConfigFileWithFlagOverride) {
  const std::string cfg = write_scratch("sim.cfg", R"({
  "n_units": 3,
  "n_periods": 20,
  "mc_reps": 2,
  "bootstrap_reps": 20,
  "seed": 4,
  "methods": ["pwb"],
  "fixed_cell_len": 2,
  "max_cell_len": 4
})");
  const std::string prefix = scratch_dir() + "/cfgrun";
  const auto res = run_cli("simulate --config " + cfg +
                           " --mc-reps 1 --out-prefix " + prefix);
  ASSERT_EQ(res.exit_code, 0) << res.output;
  const std::string report = read_file(prefix + "_report.json");
  EXPECT_NE(report.find("\"mc_reps\": 1"), std::string::npos);
  EXPECT_NE(report.find("\"n_units\": 3"), std::string::npos);
}

TEST(Cli, UnknownSubcommandExitsTwo) {
  const auto res = run_cli("frobnicate --input x");
  EXPECT_EQ(res.exit_code, 2);
}
