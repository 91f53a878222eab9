#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "amor/analysis.hpp"
#include "amor/config.hpp"
#include "amor/samplers.hpp"
#include "amor/trace_io.hpp"
#include "amor/verify.hpp"

namespace amor::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitRuntimeError = 2;

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

namespace detail {

/// Group against which a config's theta0/margins are validated: the baselines
/// without relabeling use the trivial group.
inline PermutationGroup validation_group(const ExperimentConfig& cfg) {
  if (cfg.sampler == "am" || cfg.sampler == "am_ordered" || cfg.sampler == "reference_rwm")
    return trivial_group(cfg.target.dim());
  return cfg.target.group;
}

inline RunOutput dispatch_run(const ExperimentConfig& cfg) {
  if (cfg.sampler == "amor") return run_amor(cfg.run, cfg.target, cfg.target.group);
  if (cfg.sampler == "am") return run_am(cfg.run, cfg.target);
  if (cfg.sampler == "am_ordered") return run_am_ordered(cfg.run, cfg.target);
  if (cfg.sampler == "celeux") return run_celeux(cfg.run, cfg.target);
  if (cfg.sampler == "reference_rwm") return run_reference_rwm(cfg.target.seed, cfg.run);
  throw Error("unknown sampler '" + cfg.sampler + "'");
}

inline Matrix aligned_chain_samples(const RunOutput& run, const ExperimentConfig& cfg) {
  Matrix samples = chain_samples(run, run.config.burn_in);
  if (cfg.reference != "seed") return samples;
  const std::size_t align =
      aligning_element(cfg.target.group, run.final_theta.mu(),
                       cfg.target.seed.as_gaussian().mean());
  Vector x(samples.cols());
  for (long i = 0; i < samples.rows(); ++i) {
    x = samples.row(i);
    samples.row(i) = apply_perm(cfg.target.group[align], x);
  }
  return samples;
}

inline void emit_histograms(const std::filesystem::path& dir, const RunOutput& run,
                            const ExperimentConfig& cfg) {
  const Matrix samples = aligned_chain_samples(run, cfg);
  const MomentEstimate moments = moments_of(samples);
  for (int coord = 0; coord < samples.cols(); ++coord) {
    const double sd = std::sqrt(moments.cov(coord, coord));
    const double lo = moments.mean[coord] - 5.0 * sd;
    const double hi = moments.mean[coord] + 5.0 * sd;
    const Histogram hist = marginal_histogram(samples, coord, cfg.bins, lo, hi);
    std::ofstream file(dir / ("histogram_" + std::to_string(coord) + ".csv"));
    if (cfg.reference == "seed") {
      const GaussianSeed& seed = cfg.target.seed.as_gaussian();
      const double mean = seed.mean()[coord];
      const double var = seed.cov()(coord, coord);
      const std::function<double(double)> pdf = [mean, var](double v) {
        return std::exp(-0.5 * (v - mean) * (v - mean) / var) /
               std::sqrt(kTwoPi * var);
      };
      write_histogram_csv(file, hist, &pdf);
    } else {
      write_histogram_csv(file, hist);
    }
  }
}

inline void emit_acf(const std::filesystem::path& dir, const RunOutput& run,
                     const ExperimentConfig& cfg) {
  std::vector<std::vector<double>> columns;
  for (int coord = 0; coord < run.dim(); ++coord) {
    const std::vector<double> series = chain_coordinate(run, run.config.burn_in, coord);
    const int lag = std::min<int>(cfg.max_lag, static_cast<int>(series.size()) - 1);
    columns.push_back(acf(series, lag));
  }
  std::ofstream file(dir / "acf.csv");
  write_acf_csv(file, columns);
}

}  // namespace detail

/// run: execute the configured sampler, write trace/summary (and optional
/// histogram/acf tables) into the output directory.
inline int cmd_run(const std::string& config_path, const RunOverrides& overrides = {},
                   std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::optional<ExperimentConfig> loaded;
  try {
    std::ifstream file(config_path);
    if (!file) {
      err << config_path << ": cannot open config file\n";
      return kExitConfigError;
    }
    loaded = load_experiment_config(file);
    // surface semantically invalid run parameters as config errors too
    (void)resolve_config(loaded->run, loaded->target, detail::validation_group(*loaded));
  } catch (const ConfigError& e) {
    err << config_path << ':' << e.line << ": " << e.what() << '\n';
    return kExitConfigError;
  } catch (const Error& e) {
    err << config_path << ": " << e.what() << '\n';
    return kExitConfigError;
  }
  ExperimentConfig& cfg = *loaded;
  if (overrides.seed) cfg.run.seed = *overrides.seed;
  if (overrides.out_dir) cfg.output_dir = *overrides.out_dir;

  try {
    const auto start = std::chrono::steady_clock::now();
    const RunOutput run = detail::dispatch_run(cfg);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    if (cfg.emit.count("trace")) {
      std::ofstream trace(dir / "trace.csv");
      write_trace(trace, run);
    }
    if (cfg.emit.count("summary")) {
      std::ofstream summary(dir / "summary.txt");
      write_summary(summary, build_summary(run, cfg, wall));
    }
    if (cfg.emit.count("histograms")) detail::emit_histograms(dir, run, cfg);
    if (cfg.emit.count("acf")) detail::emit_acf(dir, run, cfg);
    out << cfg.sampler << ": T=" << run.records.size()
        << " acceptance_rate=" << format_double(run.acceptance_rate)
        << " projections=" << run.total_projections << " -> " << dir.string() << '\n';
    return kExitOk;
  } catch (const NumericError& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntimeError;
  } catch (const Error& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
}

/// verify: run one of the named property suites at desk scale and print one
/// line per check. Exit 0 iff every check passes.
inline int cmd_verify(const std::string& suite, std::uint64_t seed,
                      std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<CheckResult> checks;
  try {
    checks = run_verify_suite(suite, seed);
  } catch (const Error& e) {
    err << e.what() << '\n';
    return kExitConfigError;
  }
  for (const CheckResult& c : checks)
    out << c.name << ": statistic=" << format_double(c.statistic)
        << " tolerance=" << format_double(c.tolerance) << ' '
        << (c.pass ? "PASS" : "FAIL") << '\n';
  if (all_pass(checks)) {
    out << "suite '" << suite << "': all " << checks.size() << " checks passed\n";
    return kExitOk;
  }
  err << "suite '" << suite << "': checks failed\n";
  return kExitRuntimeError;
}

struct DiagnoseOptions {
  int max_lag = 100;
  int bins = 60;
  std::string config_path;  // optional: supplies burn-in and the reference seed
  std::string out_dir = ".";
};

/// diagnose: recompute moments, ACF tables and marginal histograms from a
/// trace file. With a config supplying a Gaussian seed, adds the aligned
/// per-coordinate KS statistics and histogram density overlays.
inline int cmd_diagnose(const std::string& trace_path, const DiagnoseOptions& options = {},
                        std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::optional<ExperimentConfig> cfg;
  if (!options.config_path.empty()) {
    try {
      std::ifstream file(options.config_path);
      if (!file) {
        err << options.config_path << ": cannot open config file\n";
        return kExitConfigError;
      }
      cfg = load_experiment_config(file);
    } catch (const ConfigError& e) {
      err << options.config_path << ':' << e.line << ": " << e.what() << '\n';
      return kExitConfigError;
    }
  }

  try {
    std::ifstream file(trace_path);
    if (!file) throw TraceError(0, "cannot open trace file '" + trace_path + "'");
    const TraceData trace = read_trace(file);
    const ChainRecord& last = trace.records.back();

    RunOutput run{trace.records, 0.0, AdaptiveState(last.mu, last.sigma), last.psi,
                  SamplerConfig{}};
    long accepted = 0;
    for (const ChainRecord& rec : run.records) accepted += rec.accepted ? 1 : 0;
    run.acceptance_rate =
        static_cast<double>(accepted) / static_cast<double>(run.records.size());
    run.config.burn_in = cfg ? cfg->run.burn_in : 0;
    require(run.config.burn_in < static_cast<long>(run.records.size()),
            "burn_in exceeds the trace length");

    const std::filesystem::path dir(options.out_dir);
    std::filesystem::create_directories(dir);

    SummaryReport report;
    report.put("trace_rows", static_cast<long>(run.records.size()));
    report.put("dim", static_cast<long>(trace.dim));
    report.put("burn_in", run.config.burn_in);
    report.put("acceptance_rate", run.acceptance_rate);
    const Matrix samples = chain_samples(run, run.config.burn_in);
    const MomentEstimate moments = moments_of(samples);
    for (int i = 0; i < trace.dim; ++i)
      report.put("post_mean_" + std::to_string(i), moments.mean[i]);
    for (int i = 0; i < trace.dim; ++i)
      for (int j = 0; j < trace.dim; ++j)
        report.put("post_cov_" + std::to_string(i) + "_" + std::to_string(j),
                   moments.cov(i, j));

    std::vector<std::vector<double>> acf_columns;
    for (int i = 0; i < trace.dim; ++i) {
      const std::vector<double> series = chain_coordinate(run, run.config.burn_in, i);
      const int lag = std::min<int>(options.max_lag, static_cast<int>(series.size()) - 1);
      acf_columns.push_back(acf(series, lag));
      report.put("act_" + std::to_string(i), integrated_act(acf_columns.back()));
    }
    {
      std::ofstream acf_file(dir / "acf.csv");
      write_acf_csv(acf_file, acf_columns);
    }

    const bool with_reference = cfg && cfg->target.seed.is_gaussian();
    if (with_reference) {
      const std::vector<double> ks = aligned_marginal_ks(
          run, cfg->target.seed.as_gaussian(), cfg->target.group, run.config.burn_in);
      for (int i = 0; i < trace.dim; ++i)
        report.put("ks_" + std::to_string(i), ks[static_cast<std::size_t>(i)]);
    }

    for (int coord = 0; coord < trace.dim; ++coord) {
      const double sd = std::sqrt(moments.cov(coord, coord));
      const Histogram hist =
          marginal_histogram(samples, coord, options.bins,
                             moments.mean[coord] - 5.0 * sd, moments.mean[coord] + 5.0 * sd);
      std::ofstream hist_file(dir / ("histogram_" + std::to_string(coord) + ".csv"));
      write_histogram_csv(hist_file, hist);
    }

    std::ofstream report_file(dir / "diagnostics.txt");
    write_summary(report_file, report);
    write_summary(out, report);
    return kExitOk;
  } catch (const TraceError& e) {
    err << trace_path << ": " << e.what() << '\n';
    return kExitRuntimeError;
  } catch (const Error& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
}

}  // namespace amor::cli
