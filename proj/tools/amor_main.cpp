#include <CLI11.hpp>

#include <cstdint>
#include <string>

#include "amor/cli.hpp"
#include "amor/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Adaptive Metropolis with online relabeling: runs, verification "
               "suites and trace diagnostics"};
  app.set_version_flag("--version", std::string(amor::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string suite = "all";
  std::string trace_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int max_lag = 100;
  int bins = 60;

  CLI::App* run = app.add_subcommand("run", "run a sampler from a config file");
  run->add_option("--config", config_path, "config file path")->required();
  run->add_option("--seed", seed, "RNG seed override")->each([&](const std::string&) {
    seed_given = true;
  });
  run->add_option("--out", out_dir, "output directory override");

  CLI::App* verify = app.add_subcommand("verify", "run a named verification suite");
  verify
      ->add_option("--suite", suite,
                   "one of: partition, balance, gradient, slln, equivalence, all")
      ->required();
  verify->add_option("--seed", seed, "suite RNG seed");

  CLI::App* diagnose = app.add_subcommand("diagnose", "recompute diagnostics from a trace");
  diagnose->add_option("trace", trace_path, "trace.csv path")->required();
  diagnose->add_option("--config", config_path, "config for burn-in and reference seed");
  diagnose->add_option("--max-lag", max_lag, "ACF maximum lag")->check(CLI::PositiveNumber);
  diagnose->add_option("--bins", bins, "histogram bins")->check(CLI::PositiveNumber);
  diagnose->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    amor::cli::RunOverrides overrides;
    if (seed_given) overrides.seed = seed;
    if (!out_dir.empty()) overrides.out_dir = out_dir;
    return amor::cli::cmd_run(config_path, overrides);
  }
  if (verify->parsed()) return amor::cli::cmd_verify(suite, seed);
  amor::cli::DiagnoseOptions options;
  options.max_lag = max_lag;
  options.bins = bins;
  options.config_path = config_path;
  if (!out_dir.empty()) options.out_dir = out_dir;
  return amor::cli::cmd_diagnose(trace_path, options);
}
