#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "amor/analysis.hpp"
#include "amor/common.hpp"
#include "amor/config.hpp"
#include "amor/samplers.hpp"
#include "amor/version.hpp"

namespace amor {

/// Malformed trace file; `row` is the 1-based data row (0 = header).
struct TraceError : Error {
  TraceError(long row_, const std::string& detail)
      : Error("trace row " + std::to_string(row_) + ": " + detail), row(row_) {}

  long row;
};

/// Trace format: UTF-8 CSV, header row, one row per iteration with columns
///   t, x_0..x_{d-1}, accepted, psi, mu_0..mu_{d-1}, sigma_0..sigma_{d*d-1}
///   (row-major), tie_count
/// Floats are written as shortest round-trip decimals, so reading a trace
/// back reproduces the doubles bit for bit.
inline void write_trace(std::ostream& out, const RunOutput& run) {
  const int d = run.dim();
  out << 't';
  for (int i = 0; i < d; ++i) out << ",x_" << i;
  out << ",accepted,psi";
  for (int i = 0; i < d; ++i) out << ",mu_" << i;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out << ",sigma_" << i << '_' << j;
  out << ",tie_count\n";
  for (const ChainRecord& rec : run.records) {
    out << rec.t;
    for (int i = 0; i < d; ++i) out << ',' << format_double(rec.x[i]);
    out << ',' << (rec.accepted ? 1 : 0) << ',' << rec.psi;
    for (int i = 0; i < d; ++i) out << ',' << format_double(rec.mu[i]);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) out << ',' << format_double(rec.sigma(i, j));
    out << ',' << rec.tie_count << '\n';
  }
}

struct TraceData {
  int dim = 0;
  std::vector<ChainRecord> records;
};

inline TraceData read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw TraceError(0, "empty trace file");
  long columns = 1;
  for (char ch : line) columns += ch == ',' ? 1 : 0;
  // columns = 4 + 2d + d^2
  int d = -1;
  for (int k = 1; k <= 64; ++k)
    if (4 + 2 * k + k * k == columns) d = k;
  if (d < 0) throw TraceError(0, "header does not match the trace schema");

  TraceData trace;
  trace.dim = d;
  long row = 0;
  std::vector<std::string> fields;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    fields.clear();
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (static_cast<long>(fields.size()) != columns)
      throw TraceError(row, "expected " + std::to_string(columns) + " fields, got " +
                                std::to_string(fields.size()));
    auto number = [&](std::size_t idx) {
      double v = 0.0;
      if (!parse_double(fields[idx], v))
        throw TraceError(row, "field " + std::to_string(idx + 1) + " is not numeric: '" +
                                  fields[idx] + "'");
      return v;
    };
    auto integer = [&](std::size_t idx) {
      long v = 0;
      if (!parse_long(fields[idx], v))
        throw TraceError(row, "field " + std::to_string(idx + 1) + " is not an integer: '" +
                                  fields[idx] + "'");
      return v;
    };
    ChainRecord rec;
    std::size_t at = 0;
    rec.t = integer(at++);
    rec.x.resize(d);
    for (int i = 0; i < d; ++i) rec.x[i] = number(at++);
    const long accepted = integer(at++);
    if (accepted != 0 && accepted != 1)
      throw TraceError(row, "accepted flag must be 0 or 1");
    rec.accepted = accepted == 1;
    rec.psi = integer(at++);
    rec.mu.resize(d);
    for (int i = 0; i < d; ++i) rec.mu[i] = number(at++);
    rec.sigma.resize(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) rec.sigma(i, j) = number(at++);
    rec.tie_count = static_cast<int>(integer(at++));
    trace.records.push_back(std::move(rec));
  }
  if (trace.records.empty()) throw TraceError(0, "trace has no data rows");
  return trace;
}

/// Flat key = value report; keys are documented in the README.
struct SummaryReport {
  std::vector<std::pair<std::string, std::string>> entries;

  void put(const std::string& key, const std::string& value) {
    entries.emplace_back(key, value);
  }

  void put(const std::string& key, double value) { put(key, format_double(value)); }

  void put(const std::string& key, long value) { put(key, std::to_string(value)); }
};

inline void write_summary(std::ostream& out, const SummaryReport& report) {
  for (const auto& [key, value] : report.entries) out << key << " = " << value << '\n';
}

/// Post-burn-in moments, integrated ACT per coordinate, optional aligned KS
/// against the seed marginals, and a full config echo.
inline SummaryReport build_summary(const RunOutput& run, const ExperimentConfig& cfg,
                                   double wall_seconds) {
  SummaryReport report;
  const int d = run.dim();
  report.put("library_version", std::string(kVersion));
  report.put("sampler", cfg.sampler);
  report.put("seed", static_cast<long>(run.config.seed));
  report.put("dim", static_cast<long>(d));
  report.put("T", static_cast<long>(run.records.size()));
  report.put("burn_in", run.config.burn_in);
  report.put("acceptance_rate", run.acceptance_rate);
  report.put("total_projections", run.total_projections);

  const Matrix samples = chain_samples(run, run.config.burn_in);
  const MomentEstimate moments = moments_of(samples);
  for (int i = 0; i < d; ++i) report.put("post_mean_" + std::to_string(i), moments.mean[i]);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      report.put("post_cov_" + std::to_string(i) + "_" + std::to_string(j),
                 moments.cov(i, j));
  for (int i = 0; i < d; ++i) {
    const std::vector<double> series = chain_coordinate(run, run.config.burn_in, i);
    const int lag = std::min<int>(cfg.max_lag, static_cast<int>(series.size()) - 1);
    report.put("act_" + std::to_string(i), integrated_act(acf(series, lag)));
  }
  if (cfg.reference == "seed") {
    const std::vector<double> ks = aligned_marginal_ks(
        run, cfg.target.seed.as_gaussian(), cfg.target.group, run.config.burn_in);
    for (int i = 0; i < d; ++i) report.put("ks_" + std::to_string(i), ks[static_cast<std::size_t>(i)]);
  }
  report.put("wall_clock_seconds", wall_seconds);

  ExperimentConfig resolved = cfg;
  resolved.run = run.config;
  for (const auto& [key, value] : echo_config(resolved)) report.put("config." + key, value);
  return report;
}

inline void write_histogram_csv(std::ostream& out, const Histogram& hist,
                                const std::function<double(double)>* ref_pdf = nullptr) {
  out << "bin_lo,bin_hi,count";
  if (ref_pdf) out << ",ref_density";
  out << '\n';
  for (std::size_t b = 0; b < hist.counts.size(); ++b) {
    const double lo = hist.edges[static_cast<Eigen::Index>(b)];
    const double hi = hist.edges[static_cast<Eigen::Index>(b + 1)];
    out << format_double(lo) << ',' << format_double(hi) << ',' << hist.counts[b];
    if (ref_pdf) out << ',' << format_double((*ref_pdf)(0.5 * (lo + hi)));
    out << '\n';
  }
  out << "underflow,," << hist.underflow << (ref_pdf ? ",\n" : "\n");
  out << "overflow,," << hist.overflow << (ref_pdf ? ",\n" : "\n");
}

inline void write_acf_csv(std::ostream& out, const std::vector<std::vector<double>>& acfs) {
  out << "lag";
  for (std::size_t c = 0; c < acfs.size(); ++c) out << ",acf_" << c;
  out << '\n';
  const std::size_t rows = acfs.empty() ? 0 : acfs[0].size();
  for (std::size_t k = 0; k < rows; ++k) {
    out << k;
    for (const auto& column : acfs) out << ',' << format_double(column[k]);
    out << '\n';
  }
}

}  // namespace amor
