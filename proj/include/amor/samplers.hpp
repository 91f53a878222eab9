#pragma once

#include <algorithm>
#include <optional>
#include <utility>
#include <vector>

#include "amor/common.hpp"
#include "amor/permgroup.hpp"
#include "amor/relabel.hpp"
#include "amor/rng.hpp"
#include "amor/targets.hpp"

namespace amor {

/// All run parameters. Fields left at their "unset" sentinel (c <= 0, empty
/// theta0, empty prop_var) are filled with documented defaults when a run
/// starts.
struct SamplerConfig {
  double c = 0.0;           // proposal scale; <= 0 means "use 2.38^2 / d"
  double alpha = 1.0;       // penalty weight, >= 0
  double gamma_star = 1.0;  // step schedule gamma_t = gamma_star * t^(-beta)
  double beta = 0.7;        // must lie in (1/2, 1]
  double delta0 = 1e-2;     // truncation schedule delta_q = delta0 * 2^(-q)
  bool delta_halving = true;
  long T = 20000;
  long burn_in = 4000;
  Vector x0;
  std::optional<AdaptiveState> theta0;  // default: derived from x0, Sigma = I
  std::uint64_t seed = 0;
  double pd_floor = 1e-10;  // minimum eigenvalue admitted before projection
  double tie_tol = 0.0;
  Vector prop_var;  // Celeux: diagonal proposal variances (default c * diag(Sigma0))
};

struct ChainRecord {
  long t = 0;
  Vector x;
  bool accepted = false;
  Vector mu;
  Matrix sigma;
  long psi = 0;
  int tie_count = 1;
};

struct RunOutput {
  std::vector<ChainRecord> records;
  double acceptance_rate = 0.0;
  AdaptiveState final_theta;
  long total_projections = 0;
  SamplerConfig config;  // resolved echo: re-running it reproduces the output

  int dim() const { return final_theta.dim(); }
};

inline long factorial(int n) {
  long f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

/// log N(point | center, c * Sigma) with Sigma factored inside theta.
inline double scaled_gaussian_log_density(const AdaptiveState& theta, double c,
                                          const Vector& center, const Vector& point) {
  const auto d = static_cast<double>(theta.dim());
  const double quad =
      theta.chol().matrixL().solve(point - center).squaredNorm() / c;
  return -0.5 * (d * kLog2Pi + d * std::log(c) + theta.log_det_sigma() + quad);
}

/// q_theta(x, y) = sum_P N(P y | x, c Sigma), evaluated by log-sum-exp.
/// This is a density in y on V_theta.
inline double proposal_log_density(const PermutationGroup& group,
                                   const AdaptiveState& theta, double c,
                                   const Vector& x, const Vector& y) {
  require(c > 0.0 && std::isfinite(c), "proposal_log_density: c must be positive");
  std::vector<double> terms(group.size());
  for (std::size_t k = 0; k < group.size(); ++k)
    terms[k] = scaled_gaussian_log_density(theta, c, x, apply_perm(group[k], y));
  return log_sum_exp(terms.data(), terms.size());
}

/// log of pi(y) q_theta(y, x) / (pi(x) q_theta(x, y)), unclamped.
/// Grouped as (target terms) + (proposal terms) so the proposal difference
/// cancels exactly (bitwise zero) whenever q is symmetric, which makes the
/// trivial-group chain coincide with plain AM bit for bit.
inline double log_acceptance_ratio(const PermutationGroup& group,
                                   const AdaptiveState& theta, double c,
                                   const Vector& x_cur, double log_pi_cur,
                                   const Vector& x_prop, double log_pi_prop) {
  if (!(log_pi_cur > -kInf))
    throw NumericError("amor_acceptance", -1, "current state has zero target density");
  const double lq_forward = proposal_log_density(group, theta, c, x_cur, x_prop);
  const double lq_reverse = proposal_log_density(group, theta, c, x_prop, x_cur);
  return (log_pi_prop - log_pi_cur) + (lq_reverse - lq_forward);
}

/// Metropolis acceptance probability alpha_theta(x, y) = 1 ^ ratio built on
/// the group-summed proposal densities. `x_prop` must already be relabeled.
inline double amor_acceptance(const PermutationGroup& group,
                              const SymmetrizedTarget& target,
                              const AdaptiveState& theta, double c,
                              const Vector& x_cur, const Vector& x_prop) {
  const double lr = log_acceptance_ratio(group, theta, c, x_cur,
                                         target_log_density(target, x_cur), x_prop,
                                         target_log_density(target, x_prop));
  return std::exp(std::min(0.0, lr));
}

struct PenaltyTerms {
  Vector pen_mu;
  Matrix pen_sigma;
};

/// Barrier-gradient penalties repelling theta from the set where relabeling
/// degenerates, returned WITHOUT the alpha factor (callers scale by
/// alpha * gamma_t):
///
///   pen_mu    = + sum_{P != id} ||(I-P)S^{-1}mu||^{-4} U_P S^{-1} mu
///   pen_sigma = - sum_{P != id} ||(I-P)S^{-1}mu||^{-4}
///                    (mu mu^T S^{-1} U_P + U_P S^{-1} mu mu^T)
///
/// with U_P = (I-P)^T (I-P) and S = Sigma. With these signs the update drift
/// is the Sigma-preconditioned negated gradient of the barrier
/// (alpha/2) sum_P ||(I-P)S^{-1}mu||^{-2}, so the mean-field identities
/// grad_mu w = -S^{-1} h_mu and grad_Sigma w = -1/2 S^{-1} h_Sigma S^{-1}
/// hold exactly (checked by finite differences in the test suite).
///
/// S^{-1} is never formed; everything reduces to one Cholesky solve plus
/// permutation gathers.
inline PenaltyTerms penalty_terms(const PermutationGroup& group,
                                  const AdaptiveState& theta) {
  const int d = theta.dim();
  const Vector s = theta.solve(theta.mu());
  PenaltyTerms out{Vector::Zero(d), Matrix::Zero(d, d)};
  for (std::size_t k = 0; k < group.size(); ++k) {
    const Permutation& p = group[k];
    if (p.is_identity()) continue;
    const Vector r = s - apply_perm(p, s);  // (I-P) S^{-1} mu
    const double n2 = r.squaredNorm();
    if (!(n2 > 0.0))
      throw NumericError("penalty_terms", -1,
                         "theta lies on the boundary of Theta (zero margin)");
    const double inv_n4 = 1.0 / (n2 * n2);
    const Vector u = r - apply_perm(inverse(p), r);  // U_P S^{-1} mu
    out.pen_mu += inv_n4 * u;
    out.pen_sigma -=
        inv_n4 * (theta.mu() * u.transpose() + u * theta.mu().transpose());
  }
  return out;
}

inline Vector sa_mean_update(const Vector& mu, const Vector& x, double gamma) {
  return mu + gamma * (x - mu);
}

inline Matrix sa_cov_update(const Matrix& sigma, const Vector& mu_prev,
                            const Vector& x, double gamma) {
  const Vector dx = x - mu_prev;
  const Matrix updated = sigma + gamma * (dx * dx.transpose() - sigma);
  return symmetrize(updated);
}

/// Raw (mu, Sigma) pair produced by the stochastic update; validated (and
/// possibly projected) before it becomes an AdaptiveState.
struct ThetaCandidate {
  Vector mu;
  Matrix sigma;
};

/// Stochastic mean/covariance update; the covariance innovation uses the
/// PRE-update mean. Penalties are evaluated only when alpha != 0, so a
/// zero-alpha run never touches the boundary machinery and reproduces plain
/// AM exactly.
inline ThetaCandidate sa_update(const PermutationGroup& group,
                                const AdaptiveState& theta, const Vector& x_new,
                                double gamma_t, double alpha) {
  require(gamma_t >= 0.0, "sa_update: gamma_t must be >= 0");
  require(alpha >= 0.0, "sa_update: alpha must be >= 0");
  ThetaCandidate cand{sa_mean_update(theta.mu(), x_new, gamma_t),
                      sa_cov_update(theta.sigma(), theta.mu(), x_new, gamma_t)};
  if (alpha != 0.0) {
    const PenaltyTerms pen = penalty_terms(group, theta);
    cand.mu += (alpha * gamma_t) * pen.pen_mu;
    cand.sigma = symmetrize(cand.sigma + (alpha * gamma_t) * pen.pen_sigma);
  }
  return cand;
}

/// Expanding-compact-set truncation safeguard. Membership in K_{delta_psi}
/// requires a symmetric positive-definite Sigma with lambda_min >= pd_floor
/// and theta_margin >= delta_psi, where delta_psi = delta0 * 2^(-psi) (or the
/// constant delta0 when halving is disabled). A failure resets to the initial
/// theta0 and increments the counter.
inline std::pair<AdaptiveState, long> project_if_needed(
    const PermutationGroup& group, const ThetaCandidate& candidate, long psi,
    const AdaptiveState& theta0, double delta0, double pd_floor,
    bool delta_halving = true) {
  const int shift = static_cast<int>(std::min<long>(psi, 1100));
  const double delta_psi = delta_halving ? std::ldexp(delta0, -shift) : delta0;
  bool ok = candidate.mu.allFinite() && candidate.sigma.allFinite() &&
            approx_symmetric(candidate.sigma, 1e-12);
  if (ok) ok = min_eigenvalue(symmetrize(candidate.sigma)) >= pd_floor;
  if (ok) {
    AdaptiveState state(candidate.mu, candidate.sigma);
    if (theta_margin(group, state) >= delta_psi) return {std::move(state), psi};
  }
  return {theta0, psi + 1};
}

/// Initial theta when none is configured: mu0 = x0 perturbed along a ramp
/// until the margin clears delta0, Sigma0 = I.
inline AdaptiveState default_theta0(const Vector& x0, const PermutationGroup& group,
                                    double delta0) {
  const auto d = x0.size();
  const Matrix eye = Matrix::Identity(d, d);
  AdaptiveState plain(x0, eye);
  if (theta_margin(group, plain) >= delta0) return plain;
  Vector ramp(d);
  for (Eigen::Index i = 0; i < d; ++i)
    ramp[i] = static_cast<double>(i + 1) / static_cast<double>(d);
  for (double eps = delta0; eps < 1e300; eps *= 2.0) {
    AdaptiveState shifted(x0 + eps * ramp, eye);
    if (theta_margin(group, shifted) >= delta0) return shifted;
  }
  throw Error("default_theta0: could not reach the required margin");
}

/// Validates a config against a target/group pair and fills defaults.
/// Errors out before any iteration runs.
inline SamplerConfig resolve_config(SamplerConfig cfg, const SymmetrizedTarget& target,
                                    const PermutationGroup& group) {
  const int d = target.dim();
  require_dim(group.dim == d, "sampler config: group/target dimension mismatch");
  require(cfg.T >= 1, "sampler config: T must be >= 1");
  require(cfg.burn_in >= 0 && cfg.burn_in < cfg.T,
          "sampler config: burn_in must lie in [0, T)");
  if (cfg.c <= 0.0) cfg.c = 2.38 * 2.38 / static_cast<double>(d);
  require(std::isfinite(cfg.c), "sampler config: c must be finite");
  require(std::isfinite(cfg.alpha) && cfg.alpha >= 0.0,
          "sampler config: alpha must be >= 0");
  require(std::isfinite(cfg.gamma_star) && cfg.gamma_star > 0.0,
          "sampler config: gamma_star must be > 0");
  require(cfg.beta > 0.5 && cfg.beta <= 1.0,
          "sampler config: beta must lie in (1/2, 1]");
  require(std::isfinite(cfg.delta0) && cfg.delta0 > 0.0,
          "sampler config: delta0 must be > 0");
  require(std::isfinite(cfg.pd_floor) && cfg.pd_floor > 0.0,
          "sampler config: pd_floor must be > 0");
  require(cfg.tie_tol >= 0.0, "sampler config: tie_tol must be >= 0");
  require_dim(cfg.x0.size() == d, "sampler config: x0 dimension mismatch");
  require(cfg.x0.allFinite(), "sampler config: x0 must be finite");
  if (!cfg.theta0) cfg.theta0 = default_theta0(cfg.x0, group, cfg.delta0);
  require_dim(cfg.theta0->dim() == d, "sampler config: theta0 dimension mismatch");
  require(theta_margin(group, *cfg.theta0) >= cfg.delta0,
          "sampler config: theta0 lies outside K_delta0");
  require(min_eigenvalue(cfg.theta0->sigma()) >= cfg.pd_floor,
          "sampler config: theta0 covariance is below the PD floor");
  require(target_log_density(target, cfg.x0) > -kInf,
          "sampler config: x0 lies outside the target support");
  return cfg;
}

struct ChainState {
  Vector x;
  double log_pi_x = 0.0;
  AdaptiveState theta;
  long psi = 0;
};

struct StepResult {
  bool accepted = false;
  int tie_count = 1;
};

/// One stable-AMOR transition:
///   (a) propose N(x, c Sigma); (b) relabel by the optimal permutation;
///   (c) Metropolis accept/reject with the group-summed proposal densities;
///   (d) stochastic update of (mu, Sigma) on both branches;
///   (e) projection test.
/// RNG order: d normals, one tie-break uniform only when tie_count > 1, then
/// one accept/reject uniform.
inline StepResult amor_step(ChainState& state, long t, const SamplerConfig& cfg,
                            const SymmetrizedTarget& target,
                            const PermutationGroup& group, RngStream& rng) {
  StepResult result;
  try {
    const double gamma_t =
        cfg.gamma_star * std::pow(static_cast<double>(t), -cfg.beta);
    const Vector z = rng.normal_vector(state.x.size());
    const Vector proposal =
        state.x + std::sqrt(cfg.c) * (Matrix(state.theta.chol().matrixL()) * z);
    RelabelResult rel = optimal_permutation(group, state.theta, proposal,
                                            cfg.tie_tol, rng);
    result.tie_count = rel.tie_count;
    const double log_pi_prop = target_log_density(target, rel.relabeled_x);
    const double log_ratio =
        log_acceptance_ratio(group, state.theta, cfg.c, state.x, state.log_pi_x,
                             rel.relabeled_x, log_pi_prop);
    const double u = rng.uniform();
    result.accepted = std::log(u) < log_ratio;
    if (result.accepted) {
      state.x = std::move(rel.relabeled_x);
      state.log_pi_x = log_pi_prop;
    }
    ThetaCandidate cand = sa_update(group, state.theta, state.x, gamma_t, cfg.alpha);
    auto [theta_next, psi_next] =
        project_if_needed(group, cand, state.psi, *cfg.theta0, cfg.delta0,
                          cfg.pd_floor, cfg.delta_halving);
    state.theta = std::move(theta_next);
    state.psi = psi_next;
  } catch (const NumericError& e) {
    if (e.iteration >= 0) throw;
    throw NumericError(e.step, t, e.detail);
  }
  return result;
}

/// Full stable-AMOR run. Deterministic given the seed; returns the complete
/// per-iteration trace. A single chain is strictly sequential; independent
/// replicas may run concurrently, each owning its config/seed.
inline RunOutput run_amor(const SamplerConfig& config, const SymmetrizedTarget& target,
                          const PermutationGroup& group) {
  const SamplerConfig cfg = resolve_config(config, target, group);
  RngStream rng(cfg.seed);
  ChainState state{cfg.x0, target_log_density(target, cfg.x0), *cfg.theta0, 0};
  std::vector<ChainRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.T));
  long accepted = 0;
  for (long t = 1; t <= cfg.T; ++t) {
    const StepResult step = amor_step(state, t, cfg, target, group, rng);
    accepted += step.accepted ? 1 : 0;
    records.push_back({t, state.x, step.accepted, state.theta.mu(),
                       state.theta.sigma(), state.psi, step.tie_count});
  }
  return RunOutput{std::move(records),
                   static_cast<double>(accepted) / static_cast<double>(cfg.T),
                   state.theta, state.psi, cfg};
}

/// Plain adaptive Metropolis baseline (no relabeling, no penalty, no
/// projection): Gaussian proposal N(x, c Sigma_t), symmetric-proposal MH
/// ratio, running mean/covariance with the same gamma schedule. Shares the
/// update helpers with run_amor, so a trivial-group zero-alpha AMOR run under
/// the same seed reproduces it record for record.
inline RunOutput run_am(const SamplerConfig& config, const SymmetrizedTarget& target) {
  const PermutationGroup trivial = trivial_group(target.dim());
  const SamplerConfig cfg = resolve_config(config, target, trivial);
  RngStream rng(cfg.seed);
  Vector x = cfg.x0;
  double log_pi_x = target_log_density(target, x);
  AdaptiveState theta = *cfg.theta0;
  std::vector<ChainRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.T));
  long accepted = 0;
  for (long t = 1; t <= cfg.T; ++t) {
    const double gamma_t =
        cfg.gamma_star * std::pow(static_cast<double>(t), -cfg.beta);
    const Vector z = rng.normal_vector(x.size());
    const Vector proposal =
        x + std::sqrt(cfg.c) * (Matrix(theta.chol().matrixL()) * z);
    const double log_pi_prop = target_log_density(target, proposal);
    const double log_ratio = log_pi_prop - log_pi_x;
    const double u = rng.uniform();
    const bool accept = std::log(u) < log_ratio;
    if (accept) {
      x = proposal;
      log_pi_x = log_pi_prop;
      ++accepted;
    }
    try {
      theta = AdaptiveState(sa_mean_update(theta.mu(), x, gamma_t),
                            sa_cov_update(theta.sigma(), theta.mu(), x, gamma_t));
    } catch (const NumericError& e) {
      throw NumericError("am_covariance_update", t, e.detail);
    }
    records.push_back({t, x, accept, theta.mu(), theta.sigma(), 0, 1});
  }
  return RunOutput{std::move(records),
                   static_cast<double>(accepted) / static_cast<double>(cfg.T),
                   theta, 0, cfg};
}

/// AM with the identifiability-constraint relabeling: every proposal is
/// replaced by its ascending coordinate sort before the standard MH ratio
/// (no ratio correction). Requires the full symmetric group on coordinates.
inline RunOutput run_am_ordered(const SamplerConfig& config,
                                const SymmetrizedTarget& target) {
  require(static_cast<long>(target.group.size()) == factorial(target.dim()),
          "run_am_ordered: target group must be the full symmetric group");
  const PermutationGroup trivial = trivial_group(target.dim());
  const SamplerConfig cfg = resolve_config(config, target, trivial);
  RngStream rng(cfg.seed);
  Vector x = cfg.x0;
  double log_pi_x = target_log_density(target, x);
  AdaptiveState theta = *cfg.theta0;
  std::vector<ChainRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.T));
  long accepted = 0;
  for (long t = 1; t <= cfg.T; ++t) {
    const double gamma_t =
        cfg.gamma_star * std::pow(static_cast<double>(t), -cfg.beta);
    const Vector z = rng.normal_vector(x.size());
    Vector proposal =
        x + std::sqrt(cfg.c) * (Matrix(theta.chol().matrixL()) * z);
    std::sort(proposal.data(), proposal.data() + proposal.size());
    const double log_pi_prop = target_log_density(target, proposal);
    const double log_ratio = log_pi_prop - log_pi_x;
    const double u = rng.uniform();
    const bool accept = std::log(u) < log_ratio;
    if (accept) {
      x = proposal;
      log_pi_x = log_pi_prop;
      ++accepted;
    }
    try {
      theta = AdaptiveState(sa_mean_update(theta.mu(), x, gamma_t),
                            sa_cov_update(theta.sigma(), theta.mu(), x, gamma_t));
    } catch (const NumericError& e) {
      throw NumericError("am_ordered_covariance_update", t, e.detail);
    }
    records.push_back({t, x, accept, theta.mu(), theta.sigma(), 0, 1});
  }
  return RunOutput{std::move(records),
                   static_cast<double>(accepted) / static_cast<double>(cfg.T),
                   theta, 0, cfg};
}

/// Ordering constraint applied as post-processing: each record's sample is
/// coordinate-sorted ascending; the theta trace is untouched. Idempotent.
inline RunOutput posthoc_order(const RunOutput& output) {
  RunOutput sorted = output;
  for (ChainRecord& rec : sorted.records)
    std::sort(rec.x.data(), rec.x.data() + rec.x.size());
  return sorted;
}

/// Celeux-style baseline: non-adaptive random-walk Metropolis with a fixed
/// diagonal proposal covariance; each proposal is relabeled by the quadratic
/// criterion with the running empirical mean and DIAGONAL running variances
/// (gamma = 1/t updates, pre-update mean in the innovation), and the MH ratio
/// carries no relabeling correction.
inline RunOutput run_celeux(const SamplerConfig& config, const SymmetrizedTarget& target) {
  const PermutationGroup& group = target.group;
  const SamplerConfig cfg = resolve_config(config, target, group);
  const int d = target.dim();
  Vector prop_var = cfg.prop_var;
  if (prop_var.size() == 0) prop_var = cfg.c * cfg.theta0->sigma().diagonal();
  require_dim(prop_var.size() == d, "run_celeux: prop_var dimension mismatch");
  require((prop_var.array() > 0.0).all(), "run_celeux: prop_var must be positive");
  const Vector prop_sd = prop_var.cwiseSqrt();

  RngStream rng(cfg.seed);
  Vector x = cfg.x0;
  double log_pi_x = target_log_density(target, x);
  Vector mean_run = cfg.theta0->mu();
  Vector var_run = cfg.theta0->sigma().diagonal();
  std::vector<ChainRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.T));
  long accepted = 0;
  for (long t = 1; t <= cfg.T; ++t) {
    const Vector z = rng.normal_vector(d);
    const Vector proposal = x + prop_sd.cwiseProduct(z);
    AdaptiveState relabel_state(mean_run, Matrix(var_run.asDiagonal()));
    RelabelResult rel =
        optimal_permutation(group, relabel_state, proposal, cfg.tie_tol, rng);
    const double log_pi_prop = target_log_density(target, rel.relabeled_x);
    const double log_ratio = log_pi_prop - log_pi_x;
    const double u = rng.uniform();
    const bool accept = std::log(u) < log_ratio;
    if (accept) {
      x = std::move(rel.relabeled_x);
      log_pi_x = log_pi_prop;
      ++accepted;
    }
    const double gamma_t = 1.0 / static_cast<double>(t);
    const Vector dx = x - mean_run;  // pre-update mean
    // the empirical variance of a single sample is degenerate; keep the
    // configured prior until two samples exist
    if (t >= 2) var_run += gamma_t * (dx.cwiseProduct(dx) - var_run);
    mean_run += gamma_t * dx;
    records.push_back({t, x, accept, mean_run, Matrix(var_run.asDiagonal()), 0,
                       rel.tie_count});
  }
  return RunOutput{std::move(records),
                   static_cast<double>(accepted) / static_cast<double>(cfg.T),
                   AdaptiveState(mean_run, Matrix(var_run.asDiagonal())), 0, cfg};
}

/// Reference chain for the ACF comparisons: non-adaptive random-walk
/// Metropolis targeting the UN-symmetrized Gaussian seed with fixed proposal
/// covariance c * cov_seed.
inline RunOutput run_reference_rwm(const SeedDensity& seed, const SamplerConfig& config) {
  const GaussianSeed& gauss = seed.as_gaussian();
  const SymmetrizedTarget plain{seed, trivial_group(gauss.dim())};
  const SamplerConfig cfg = resolve_config(config, plain, plain.group);
  Eigen::LLT<Matrix> prop_llt(Matrix(cfg.c * gauss.cov()));
  require(prop_llt.info() == Eigen::Success,
          "run_reference_rwm: proposal covariance is not positive definite");
  const Matrix prop_l = prop_llt.matrixL();

  RngStream rng(cfg.seed);
  Vector x = cfg.x0;
  double log_pi_x = gauss.log_density(x);
  std::vector<ChainRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.T));
  long accepted = 0;
  for (long t = 1; t <= cfg.T; ++t) {
    const Vector z = rng.normal_vector(gauss.dim());
    const Vector proposal = x + prop_l * z;
    const double log_pi_prop = gauss.log_density(proposal);
    const double u = rng.uniform();
    const bool accept = std::log(u) < log_pi_prop - log_pi_x;
    if (accept) {
      x = proposal;
      log_pi_x = log_pi_prop;
      ++accepted;
    }
    records.push_back({t, x, accept, gauss.mean(), gauss.cov(), 0, 1});
  }
  return RunOutput{std::move(records),
                   static_cast<double>(accepted) / static_cast<double>(cfg.T),
                   AdaptiveState(gauss.mean(), gauss.cov()), 0, cfg};
}

}  // namespace amor
