#include "amor/cli.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace amor;

namespace {

std::string g_binary_path;  // set from argv in main()

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("amor_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  return path;
}

std::string example_config(const std::string& out_dir, long T = 10,
                         const std::string& extra_output = "") {
  std::ostringstream cfg;
  cfg << "[target]\n"
         "kind = gaussian\n"
         "dim = 2\n"
         "mean = 0 2\n"
         "cov = 16 -0.975 -0.975 1\n"
         "\n[group]\n"
         "kind = full_symmetric\n"
         "\n[sampler]\n"
         "algorithm = amor\n"
         "alpha = 1\n"
         "T = "
      << T
      << "\n"
         "burn_in = "
      << T / 5
      << "\n"
         "seed = 42\n"
         "x0 = 0 2\n"
         "\n[output]\n"
         "dir = "
      << out_dir << "\n"
      << extra_output;
  return cfg.str();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

long count_data_rows(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  long rows = -1;  // skip header
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  return rows;
}

std::map<std::string, std::string> read_kv(const fs::path& path) {
  std::ifstream in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return kv;
}

}  // namespace

TEST(CmdRun, WritesTraceAndSummary) {
  const fs::path dir = fresh_dir("run_basic");
  const fs::path cfg = write_file(dir / "config.ini", example_config((dir / "out").string()));
  std::ostringstream out, err;
  const int code = cli::cmd_run(cfg.string(), {}, out, err);
  EXPECT_EQ(code, cli::kExitOk) << err.str();
  EXPECT_EQ(count_data_rows(dir / "out" / "trace.csv"), 10);
  EXPECT_TRUE(fs::exists(dir / "out" / "summary.txt"));
}

TEST(CmdRun, MissingTargetSectionExitsOneWithLineNumber) {
  const fs::path dir = fresh_dir("run_missing_target");
  const fs::path cfg =
      write_file(dir / "config.ini", "[sampler]\nalgorithm = am\nx0 = 0 0\n");
  std::ostringstream out, err;
  const int code = cli::cmd_run(cfg.string(), {}, out, err);
  EXPECT_EQ(code, cli::kExitConfigError);
  EXPECT_NE(err.str().find("config.ini:"), std::string::npos);
  EXPECT_NE(err.str().find("target"), std::string::npos);
}

TEST(CmdRun, ByteIdenticalTracesForSameSeed) {
  const fs::path dir = fresh_dir("run_determinism");
  const fs::path cfg =
      write_file(dir / "config.ini", example_config((dir / "a").string(), 200));
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_run(cfg.string(), {}, out, err), cli::kExitOk) << err.str();
  cli::RunOverrides to_b;
  to_b.out_dir = (dir / "b").string();
  ASSERT_EQ(cli::cmd_run(cfg.string(), to_b, out, err), cli::kExitOk) << err.str();
  EXPECT_EQ(slurp(dir / "a" / "trace.csv"), slurp(dir / "b" / "trace.csv"));

  cli::RunOverrides reseeded;
  reseeded.out_dir = (dir / "c").string();
  reseeded.seed = 43;
  ASSERT_EQ(cli::cmd_run(cfg.string(), reseeded, out, err), cli::kExitOk) << err.str();
  EXPECT_NE(slurp(dir / "a" / "trace.csv"), slurp(dir / "c" / "trace.csv"));
}

TEST(CmdRun, EmitsHistogramsAndAcfOnRequest) {
  const fs::path dir = fresh_dir("run_emits");
  const fs::path cfg = write_file(
      dir / "config.ini",
      example_config((dir / "out").string(), 2000,
                   "emit = trace summary histograms acf\nmax_lag = 25\nreference = seed\n"));
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_run(cfg.string(), {}, out, err), cli::kExitOk) << err.str();
  EXPECT_TRUE(fs::exists(dir / "out" / "histogram_0.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "histogram_1.csv"));
  EXPECT_NE(slurp(dir / "out" / "histogram_0.csv").find("ref_density"),
            std::string::npos);
  EXPECT_EQ(count_data_rows(dir / "out" / "acf.csv"), 26);  // lags 0..25
  const auto kv = read_kv(dir / "out" / "summary.txt");
  EXPECT_TRUE(kv.count("ks_0"));
  EXPECT_TRUE(kv.count("ks_1"));
}

TEST(CmdRun, InvalidRunParametersExitOne) {
  const fs::path dir = fresh_dir("run_bad_values");
  std::string text = example_config((dir / "out").string(), 10);
  text.replace(text.find("burn_in = 2"), 11, "burn_in = 99");  // burn_in >= T
  const fs::path cfg = write_file(dir / "config.ini", text);
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_run(cfg.string(), {}, out, err), cli::kExitConfigError);
  EXPECT_NE(err.str().find("burn_in"), std::string::npos);
}

TEST(CmdVerify, UnknownSuiteExitsOne) {
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_verify("nonsense", 1, out, err), cli::kExitConfigError);
}

TEST(CmdVerify, BalanceSuiteReportsResidualAtTolerance) {
  std::ostringstream out, err;
  const int code = cli::cmd_verify("balance", 3, out, err);
  EXPECT_EQ(code, cli::kExitOk) << err.str();
  EXPECT_NE(out.str().find("balance_log_residual"), std::string::npos);
  EXPECT_NE(out.str().find("tolerance=1e-10"), std::string::npos);
}

TEST(CmdVerify, FullSuitePassesOnDefaultSeedWithinBudget) {
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream out, err;
  const int code = cli::cmd_verify("all", 0, out, err);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(code, cli::kExitOk) << err.str() << out.str();
  EXPECT_LT(seconds, 120.0);
}

TEST(CmdVerify, ResultsIndependentOfThreadCap) {
  auto run_with = [](const char* threads) {
    setenv("AMOR_THREADS", threads, 1);
    std::ostringstream out, err;
    cli::cmd_verify("partition", 11, out, err);
    unsetenv("AMOR_THREADS");
    return out.str();
  };
  EXPECT_EQ(run_with("1"), run_with("4"));
}

TEST(CmdVerify, EquivalenceSuitePassesAndPrintsChecks) {
  std::ostringstream out, err;
  const int code = cli::cmd_verify("equivalence", 7, out, err);
  EXPECT_EQ(code, cli::kExitOk) << err.str();
  EXPECT_NE(out.str().find("PASS"), std::string::npos);
  EXPECT_NE(out.str().find("equivalence_record_mismatches"), std::string::npos);
}

TEST(CmdDiagnose, ReproducesSummaryMomentsExactly) {
  const fs::path dir = fresh_dir("diagnose_roundtrip");
  const fs::path cfg = write_file(
      dir / "config.ini",
      example_config((dir / "out").string(), 5000, "reference = seed\n"));
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_run(cfg.string(), {}, out, err), cli::kExitOk) << err.str();

  cli::DiagnoseOptions options;
  options.config_path = cfg.string();
  options.out_dir = (dir / "diag").string();
  std::ostringstream diag_out;
  ASSERT_EQ(cli::cmd_diagnose((dir / "out" / "trace.csv").string(), options, diag_out, err),
            cli::kExitOk)
      << err.str();

  const auto summary = read_kv(dir / "out" / "summary.txt");
  const auto diagnostics = read_kv(dir / "diag" / "diagnostics.txt");
  for (const char* key : {"post_mean_0", "post_mean_1", "post_cov_0_0", "post_cov_0_1",
                          "post_cov_1_1", "act_0", "act_1", "acceptance_rate", "ks_0"}) {
    ASSERT_TRUE(summary.count(key)) << key;
    ASSERT_TRUE(diagnostics.count(key)) << key;
    EXPECT_EQ(summary.at(key), diagnostics.at(key)) << key;
  }
  EXPECT_EQ(count_data_rows(dir / "diag" / "acf.csv"), 101);  // default max_lag 100
}

TEST(CmdDiagnose, ConstantTraceHitsZeroVarianceError) {
  const fs::path dir = fresh_dir("diagnose_constant");
  std::ostringstream trace;
  trace << "t,x_0,x_1,accepted,psi,mu_0,mu_1,sigma_0_0,sigma_0_1,sigma_1_0,sigma_1_1,tie_count\n";
  for (int t = 1; t <= 50; ++t)
    trace << t << ",1,2,0,0,0,2,1,0,0,1,1\n";
  const fs::path path = write_file(dir / "trace.csv", trace.str());
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_diagnose(path.string(), {}, out, err), cli::kExitRuntimeError);
  EXPECT_NE(err.str().find("zero variance"), std::string::npos);
}

TEST(CmdDiagnose, MalformedTraceReportsRowNumber) {
  const fs::path dir = fresh_dir("diagnose_malformed");
  const fs::path path = write_file(
      dir / "trace.csv",
      "t,x_0,x_1,accepted,psi,mu_0,mu_1,sigma_0_0,sigma_0_1,sigma_1_0,sigma_1_1,tie_count\n"
      "1,0,0,1,0,0,0,1,0,0,1,1\n"
      "2,broken\n");
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_diagnose(path.string(), {}, out, err), cli::kExitRuntimeError);
  EXPECT_NE(err.str().find("row 2"), std::string::npos);
}

TEST(NumericErrorFormatting, NamesStepAndIteration) {
  const NumericError e("sa_update", 42, "sigma not positive definite");
  EXPECT_NE(std::string(e.what()).find("sa_update"), std::string::npos);
  EXPECT_NE(std::string(e.what()).find("iteration 42"), std::string::npos);
}

TEST(Binary, EndToEndSmoke) {
  if (g_binary_path.empty()) GTEST_SKIP() << "binary path not supplied";
  const fs::path dir = fresh_dir("binary_smoke");
  const fs::path cfg = write_file(dir / "config.ini",
                                  example_config((dir / "out").string(), 300));
  auto shell = [&](const std::string& args) {
    const std::string cmd = g_binary_path + " " + args + " > " +
                            (dir / "stdout.txt").string() + " 2> " +
                            (dir / "stderr.txt").string();
    return std::system(cmd.c_str());
  };
  EXPECT_EQ(shell("--version"), 0);
  EXPECT_EQ(shell("run --config " + cfg.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "trace.csv"));
  EXPECT_EQ(shell("diagnose " + (dir / "out" / "trace.csv").string() + " --config " +
                  cfg.string() + " --out " + (dir / "diag").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "diag" / "diagnostics.txt"));
  EXPECT_EQ(shell("verify --suite equivalence --seed 5"), 0);
  EXPECT_NE(shell("verify --suite bogus"), 0);
  EXPECT_NE(shell("run --config " + (dir / "nope.ini").string()), 0);
}

int main(int argc, char** argv) {
  testing::InitGoogleTest(&argc, argv);
  if (argc > 1) g_binary_path = argv[1];
  return RUN_ALL_TESTS();
}
