#pragma once

#include <string>
#include <vector>

#include "amor/analysis.hpp"
#include "amor/common.hpp"
#include "amor/parallel.hpp"
#include "amor/permgroup.hpp"
#include "amor/relabel.hpp"
#include "amor/rng.hpp"
#include "amor/samplers.hpp"
#include "amor/targets.hpp"

namespace amor {

struct CheckResult {
  std::string name;
  double statistic = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline bool all_pass(const std::vector<CheckResult>& checks) {
  for (const CheckResult& c : checks)
    if (!c.pass) return false;
  return true;
}

/// Derived seed for the i-th independent sub-stream of a suite.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t i) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (i + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Random theta in the interior of Theta: mu ~ N(0, 4 I), Sigma = A A^T + I/2
/// with standard normal A, redrawn until the margin clears `min_margin`.
inline AdaptiveState random_theta(int d, const PermutationGroup& group,
                                  double min_margin, RngStream& rng) {
  for (;;) {
    const Vector mu = 2.0 * rng.normal_vector(d);
    Matrix a(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
    const Matrix sigma = a * a.transpose() + 0.5 * Matrix::Identity(d, d);
    AdaptiveState theta(mu, sigma);
    if (theta_margin(group, theta) >= min_margin) return theta;
  }
}

/// A pi-draw relabeled into V_theta (postcondition of the relabel step).
inline Vector random_voronoi_point(const SymmetrizedTarget& target,
                                   const PermutationGroup& group,
                                   const AdaptiveState& theta, RngStream& rng) {
  RelabelResult rel = optimal_permutation(group, theta, sample_pi(target, rng), 0.0, rng);
  return rel.relabeled_x;
}

/// Partition suite: uniqueness of the criterion minimizer and the 1/|P| mass of
/// the Voronoi cell under pi.
inline std::vector<CheckResult> verify_partition(std::uint64_t seed,
                                                 long mass_draws = 100000,
                                                 int theta_count = 20) {
  const SymmetrizedTarget target = make_running_example_target();
  const PermutationGroup& group = target.group;
  std::vector<CheckResult> checks;

  {
    RngStream rng(substream_seed(seed, 0));
    const AdaptiveState theta = random_theta(2, group, 0.05, rng);
    const long n = 10000;
    long ties = 0;
    for (long i = 0; i < n; ++i) {
      const Vector x = 3.0 * rng.normal_vector(2);
      double best = kInf;
      int minima = 0;
      for (std::size_t k = 0; k < group.size(); ++k) {
        const double value = criterion(theta, apply_perm(group[k], x));
        if (value < best) {
          best = value;
          minima = 1;
        } else if (value == best) {
          ++minima;
        }
      }
      if (minima != 1) ++ties;
    }
    const double freq = static_cast<double>(ties) / static_cast<double>(n);
    checks.push_back({"partition_unique_minimizer_tie_freq", freq, 1e-3, freq < 1e-3});
  }

  {
    const double bound =
        3.0 * std::sqrt(0.25 / static_cast<double>(mass_draws));
    std::vector<double> deviation(static_cast<std::size_t>(theta_count));
    parallel_for(static_cast<std::size_t>(theta_count), [&](std::size_t i) {
      RngStream rng(substream_seed(seed, 100 + i));
      const AdaptiveState theta = random_theta(2, group, 0.05, rng);
      long inside = 0;
      for (long k = 0; k < mass_draws; ++k)
        inside += in_voronoi(group, theta, sample_pi(target, rng)) ? 1 : 0;
      const double frac = static_cast<double>(inside) / static_cast<double>(mass_draws);
      deviation[i] = std::abs(frac - 1.0 / static_cast<double>(group.size()));
    });
    int within = 0;
    double worst = 0.0;
    for (double dev : deviation) {
      worst = std::max(worst, dev);
      within += dev <= bound ? 1 : 0;
    }
    checks.push_back({"partition_mass_within_3se_count", static_cast<double>(within),
                      static_cast<double>(theta_count - 1), within >= theta_count - 1});
    checks.push_back({"partition_mass_worst_abs_dev", worst, 2.0 * bound, worst <= 2.0 * bound});
  }
  return checks;
}

/// Proposition-1 suite: pointwise detailed balance, proposal normalization on
/// V_theta (importance sampling), and Voronoi closure along a run.
inline std::vector<CheckResult> verify_balance(std::uint64_t seed, int triples = 1000) {
  const SymmetrizedTarget target = make_running_example_target();
  const PermutationGroup& group = target.group;
  const double c = 2.38 * 2.38 / 2.0;
  std::vector<CheckResult> checks;

  {
    RngStream rng(substream_seed(seed, 0));
    double worst = 0.0;
    for (int i = 0; i < triples; ++i) {
      const AdaptiveState theta = random_theta(2, group, 0.05, rng);
      const Vector x = random_voronoi_point(target, group, theta, rng);
      const Vector y = random_voronoi_point(target, group, theta, rng);
      const double a =
          target_log_density(target, x) + proposal_log_density(group, theta, c, x, y);
      const double b =
          target_log_density(target, y) + proposal_log_density(group, theta, c, y, x);
      const double lhs = a + std::min(0.0, b - a);
      const double rhs = b + std::min(0.0, a - b);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    checks.push_back({"balance_log_residual", worst, 1e-10, worst <= 1e-10});
  }

  {
    const int theta_count = 3;
    const long n = 100000;
    const double box = 30.0;
    std::vector<double> sigmas_off(static_cast<std::size_t>(theta_count));
    parallel_for(static_cast<std::size_t>(theta_count), [&](std::size_t i) {
      RngStream rng(substream_seed(seed, 200 + i));
      const AdaptiveState theta = random_theta(2, group, 0.3, rng);
      const Vector x = random_voronoi_point(target, group, theta, rng);
      const double area = (2.0 * box) * (2.0 * box);
      double sum = 0.0, sum_sq = 0.0;
      Vector y(2);
      for (long k = 0; k < n; ++k) {
        y[0] = box * (2.0 * rng.uniform() - 1.0);
        y[1] = box * (2.0 * rng.uniform() - 1.0);
        double f = 0.0;
        if (in_voronoi(group, theta, y))
          f = std::exp(proposal_log_density(group, theta, c, x, y)) * area;
        sum += f;
        sum_sq += f * f;
      }
      const double mean = sum / static_cast<double>(n);
      const double var = sum_sq / static_cast<double>(n) - mean * mean;
      const double se = std::sqrt(var / static_cast<double>(n));
      sigmas_off[i] = std::abs(mean - 1.0) / se;
    });
    double worst = 0.0;
    for (double s : sigmas_off) worst = std::max(worst, s);
    checks.push_back({"proposal_normalization_max_sigmas", worst, 3.0, worst <= 3.0});
  }

  {
    SamplerConfig cfg;
    cfg.T = 2000;
    cfg.burn_in = 0;
    cfg.alpha = 1.0;
    cfg.seed = substream_seed(seed, 300);
    cfg.x0 = Vector(2);
    cfg.x0 << 0.0, 2.0;
    const RunOutput run = run_amor(cfg, target, group);
    AdaptiveState prev = *run.config.theta0;
    long violations = 0;
    for (const ChainRecord& rec : run.records) {
      if (rec.accepted && !in_voronoi(group, prev, rec.x)) ++violations;
      prev = AdaptiveState(rec.mu, rec.sigma);
    }
    checks.push_back({"voronoi_closure_violations", static_cast<double>(violations), 0.0,
                      violations == 0});
  }
  return checks;
}

/// Gradient suite: finite-difference gradient identity of the Lyapunov
/// function and the closed-form descent bound at random theta.
inline std::vector<CheckResult> verify_gradient(std::uint64_t seed, long n = 1000000) {
  const SymmetrizedTarget target = make_running_example_target();
  const PermutationGroup& group = target.group;
  std::vector<CheckResult> checks;

  {
    RngStream rng(substream_seed(seed, 0));
    Vector mu(2);
    mu << 0.0, 2.0;
    const AdaptiveState theta(mu, Matrix::Identity(2, 2));
    const GradientCheckResult res =
        gradient_identity_check(target, group, theta, 1.0, n, 1e-3, rng);
    checks.push_back({"gradient_identity_rel_err_mu", res.max_rel_err_mu, 0.05,
                      res.max_rel_err_mu <= 0.05});
    checks.push_back({"gradient_identity_rel_err_sigma", res.max_rel_err_sigma, 0.05,
                      res.max_rel_err_sigma <= 0.05});
  }

  {
    const int theta_count = 10;
    std::vector<double> ratio(static_cast<std::size_t>(theta_count));
    parallel_for(static_cast<std::size_t>(theta_count), [&](std::size_t i) {
      RngStream rng(substream_seed(seed, 400 + i));
      const AdaptiveState theta = random_theta(2, group, 0.2, rng);
      const DescentEstimate est = descent_check(target, group, theta, 1.0, 20000, rng);
      ratio[i] = est.value / est.stderr_value;
    });
    double worst = -kInf;
    for (double r : ratio) worst = std::max(worst, r);
    checks.push_back({"descent_max_value_over_stderr", worst, 3.0, worst <= 3.0});
  }
  return checks;
}

/// Ergodic-average suite: post-burn-in averages of swap-symmetric functionals match
/// the analytic seed expectations on the running example.
inline std::vector<CheckResult> verify_slln(std::uint64_t seed) {
  const SymmetrizedTarget target = make_running_example_target();
  SamplerConfig cfg;
  cfg.T = 20000;
  cfg.burn_in = 4000;
  cfg.alpha = 1.0;
  cfg.seed = seed;
  cfg.x0 = Vector(2);
  cfg.x0 << 0.0, 2.0;
  const RunOutput run = run_amor(cfg, target, target.group);
  const Matrix samples = chain_samples(run, cfg.burn_in);
  double sum_lin = 0.0, sum_prod = 0.0;
  for (long i = 0; i < samples.rows(); ++i) {
    sum_lin += samples(i, 0) + samples(i, 1);
    sum_prod += samples(i, 0) * samples(i, 1);
  }
  const auto n = static_cast<double>(samples.rows());
  const double avg_lin = sum_lin / n;
  const double avg_prod = sum_prod / n;
  // E[X1 + X2] = 0 + 2; E[X1 X2] = cov + m1 m2 = -0.975 under the seed, and
  // both functionals are swap-invariant, so the pi expectations coincide.
  std::vector<CheckResult> checks;
  checks.push_back({"slln_sum_abs_err", std::abs(avg_lin - 2.0), 0.2,
                    std::abs(avg_lin - 2.0) <= 0.2});
  checks.push_back({"slln_product_abs_err", std::abs(avg_prod - (-0.975)), 0.3,
                    std::abs(avg_prod - (-0.975)) <= 0.3});
  return checks;
}

/// Shared-seed equivalence: a trivial-group zero-alpha AMOR run must equal a
/// plain AM run record for record, bit for bit.
inline std::vector<CheckResult> verify_equivalence(std::uint64_t seed, long T = 10000) {
  const SymmetrizedTarget target = make_running_example_target();
  SamplerConfig cfg;
  cfg.T = T;
  cfg.burn_in = 0;
  cfg.alpha = 0.0;
  cfg.gamma_star = 0.5;  // gamma_1 = 1 would degenerate the unprojected AM update
  cfg.seed = seed;
  cfg.x0 = Vector(2);
  cfg.x0 << 0.0, 2.0;
  const RunOutput amor = run_amor(cfg, target, trivial_group(2));
  const RunOutput am = run_am(cfg, target);
  long mismatches = 0;
  if (amor.records.size() != am.records.size()) {
    mismatches = static_cast<long>(std::max(amor.records.size(), am.records.size()));
  } else {
    for (std::size_t i = 0; i < amor.records.size(); ++i) {
      const ChainRecord& a = amor.records[i];
      const ChainRecord& b = am.records[i];
      const bool same = a.t == b.t && a.accepted == b.accepted && a.psi == b.psi &&
                        a.tie_count == b.tie_count && bits_equal(a.x, b.x) &&
                        bits_equal(a.mu, b.mu) && bits_equal(a.sigma, b.sigma);
      if (!same) ++mismatches;
    }
  }
  std::vector<CheckResult> checks;
  checks.push_back({"equivalence_record_mismatches", static_cast<double>(mismatches), 0.0,
                    mismatches == 0});
  return checks;
}

inline std::vector<CheckResult> run_verify_suite(const std::string& suite,
                                                 std::uint64_t seed) {
  if (suite == "partition") return verify_partition(seed);
  if (suite == "balance") return verify_balance(seed);
  if (suite == "gradient") return verify_gradient(seed);
  if (suite == "slln") return verify_slln(seed);
  if (suite == "equivalence") return verify_equivalence(seed);
  if (suite == "all") {
    std::vector<CheckResult> all;
    for (const char* name : {"partition", "balance", "gradient", "slln", "equivalence"}) {
      const std::vector<CheckResult> part = run_verify_suite(name, seed);
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  throw Error("unknown verification suite '" + suite + "'");
}

}  // namespace amor
