#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "amor/common.hpp"
#include "amor/permgroup.hpp"
#include "amor/relabel.hpp"
#include "amor/rng.hpp"
#include "amor/samplers.hpp"
#include "amor/targets.hpp"

namespace amor {

/// ACF(k) = (1/((n-k) v)) sum_t (s_t - m)(s_{t+k} - m), with m the sample
/// mean and v the (1/n-normalized) sample variance, so ACF(0) = 1 exactly.
inline std::vector<double> acf(const std::vector<double>& series, int max_lag) {
  const auto n = static_cast<long>(series.size());
  require(max_lag >= 1 && n > max_lag, "acf: need series length > max_lag >= 1");
  double mean = 0.0;
  for (double s : series) mean += s;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double s : series) var += (s - mean) * (s - mean);
  var /= static_cast<double>(n);
  if (!(var > 0.0)) throw NumericError("acf", -1, "series has zero variance");

  std::vector<double> out(static_cast<std::size_t>(max_lag) + 1);
  out[0] = 1.0;
  for (int k = 1; k <= max_lag; ++k) {
    double acc = 0.0;
    for (long t = 0; t + k < n; ++t)
      acc += (series[static_cast<std::size_t>(t)] - mean) *
             (series[static_cast<std::size_t>(t + k)] - mean);
    out[static_cast<std::size_t>(k)] = acc / (static_cast<double>(n - k) * var);
  }
  return out;
}

/// 1 + 2 sum_{k>=1} ACF(k), truncated at the first negative value
/// (initial-positive-sequence rule).
inline double integrated_act(const std::vector<double>& acf_values) {
  require(!acf_values.empty() && std::abs(acf_values[0] - 1.0) <= 1e-12,
          "integrated_act: acf_values[0] must be 1");
  double act = 1.0;
  for (std::size_t k = 1; k < acf_values.size(); ++k) {
    if (acf_values[k] < 0.0) break;
    act += 2.0 * acf_values[k];
  }
  return act;
}

struct MomentEstimate {
  Vector mean;
  Matrix cov;
  long n = 0;
  Vector mean_stderr;
};

/// Empirical mean / covariance (1/(n-1)) of the rows of `samples`.
inline MomentEstimate moments_of(const Matrix& samples) {
  const long n = samples.rows();
  require(n >= 1, "moments_of: empty sample");
  const auto d = samples.cols();
  MomentEstimate est;
  est.n = n;
  est.mean = samples.colwise().mean();
  Matrix centered = samples.rowwise() - est.mean.transpose();
  est.cov = n > 1 ? Matrix((centered.transpose() * centered) / static_cast<double>(n - 1))
                  : Matrix(Matrix::Zero(d, d));
  est.mean_stderr = (est.cov.diagonal() / static_cast<double>(n)).cwiseSqrt();
  return est;
}

/// Relabels each row into V_theta by direct criterion minimization over the
/// group (ties are measure-zero under any absolutely continuous law, so no
/// tie-break draw is involved).
inline Matrix relabel_samples(const Matrix& samples, const PermutationGroup& group,
                              const AdaptiveState& theta) {
  Matrix out(samples.rows(), samples.cols());
  Vector x(samples.cols());
  for (long i = 0; i < samples.rows(); ++i) {
    x = samples.row(i);
    double best = kInf;
    for (std::size_t k = 0; k < group.size(); ++k) {
      const Vector px = apply_perm(group[k], x);
      const double value = criterion(theta, px);
      if (value < best) {
        best = value;
        out.row(i) = px;
      }
    }
  }
  return out;
}

/// n exact pi-draws as rows (seed sample + uniform group element).
inline Matrix draw_pi_samples(const SymmetrizedTarget& target, long n, RngStream& rng) {
  Matrix samples(n, target.dim());
  for (long i = 0; i < n; ++i) samples.row(i) = sample_pi(target, rng);
  return samples;
}

/// Monte Carlo estimate of the pi_theta moments: pi-draws relabeled into
/// V_theta are pi_theta-distributed, so the relabeled empirical moments are
/// consistent for (mu_{pi_theta}, Sigma_{pi_theta}) with i.i.d. CLT error
/// bars.
inline MomentEstimate pitheta_moments(const SymmetrizedTarget& target,
                                      const PermutationGroup& group,
                                      const AdaptiveState& theta, long n,
                                      RngStream& rng) {
  require(n >= 2, "pitheta_moments: need n >= 2");
  return moments_of(relabel_samples(draw_pi_samples(target, n, rng), group, theta));
}

struct MeanFieldValue {
  Vector h_mu;
  Matrix h_sigma;
  double norm = 0.0;  // joint norm sqrt(|h_mu|^2 + |h_sigma|_F^2)
};

/// Mean field of the stochastic update at theta:
///   h_mu    = mu_pi - mu + alpha * pen_mu
///   h_sigma = Sigma_pi - Sigma + (mu_pi - mu)(mu_pi - mu)^T + alpha * pen_sigma
/// with the penalty terms of penalty_terms(). Errors out when theta lies on
/// the boundary of Theta.
inline MeanFieldValue mean_field(const AdaptiveState& theta, double alpha,
                                 const MomentEstimate& moments,
                                 const PermutationGroup& group) {
  require(theta_margin(group, theta) > 0.0, "mean_field: theta outside Theta");
  const Vector dm = moments.mean - theta.mu();
  MeanFieldValue h;
  h.h_mu = dm;
  h.h_sigma = moments.cov - theta.sigma() + dm * dm.transpose();
  if (alpha != 0.0) {
    const PenaltyTerms pen = penalty_terms(group, theta);
    h.h_mu += alpha * pen.pen_mu;
    h.h_sigma += alpha * pen.pen_sigma;
  }
  h.h_sigma = symmetrize(h.h_sigma);
  h.norm = std::sqrt(h.h_mu.squaredNorm() + h.h_sigma.squaredNorm());
  return h;
}

/// sum_{P != id} ||(I-P) Sigma^{-1} mu||^{-2}; the Lyapunov barrier without
/// its alpha/2 factor.
inline double boundary_barrier(const PermutationGroup& group, const AdaptiveState& theta) {
  const Vector s = theta.solve(theta.mu());
  double total = 0.0;
  for (std::size_t k = 0; k < group.size(); ++k) {
    if (group[k].is_identity()) continue;
    const double n2 = (s - apply_perm(group[k], s)).squaredNorm();
    if (!(n2 > 0.0))
      throw NumericError("boundary_barrier", -1, "theta on the boundary of Theta");
    total += 1.0 / n2;
  }
  return total;
}

namespace detail {

/// Cross-entropy part of w against a fixed pi-sample buffer:
///   (1/n) sum_i -log N(relabel_theta(x_i) | theta)
/// = 1/2 (d log 2pi + log det Sigma + mean_i min_P L_theta(P x_i)).
/// Reusing one buffer across theta values gives common-random-number
/// estimates whose differences are smooth in theta.
inline double cross_entropy_on_samples(const Matrix& pi_samples,
                                       const PermutationGroup& group,
                                       const AdaptiveState& theta) {
  const long n = pi_samples.rows();
  double acc = 0.0;
  Vector x(pi_samples.cols());
  for (long i = 0; i < n; ++i) {
    x = pi_samples.row(i);
    double best = kInf;
    for (std::size_t k = 0; k < group.size(); ++k)
      best = std::min(best, criterion(theta, apply_perm(group[k], x)));
    acc += best;
  }
  const auto d = static_cast<double>(theta.dim());
  return 0.5 * (d * kLog2Pi + theta.log_det_sigma() + acc / static_cast<double>(n));
}

inline double lyapunov_on_samples(const Matrix& pi_samples, const PermutationGroup& group,
                                  const AdaptiveState& theta, double alpha) {
  double w = cross_entropy_on_samples(pi_samples, group, theta);
  if (alpha != 0.0) w += 0.5 * alpha * boundary_barrier(group, theta);
  return w;
}

}  // namespace detail

/// Monte Carlo estimate of the Lyapunov function
///   w(theta) = -int log N(x | theta) pi_theta(dx)
///              + (alpha/2) sum_{P != id} ||(I-P)Sigma^{-1}mu||^{-2}.
inline double lyapunov_w(const SymmetrizedTarget& target, const PermutationGroup& group,
                         const AdaptiveState& theta, double alpha, long n,
                         RngStream& rng) {
  require(n >= 1, "lyapunov_w: need n >= 1");
  require(theta_margin(group, theta) > 0.0, "lyapunov_w: theta outside Theta");
  return detail::lyapunov_on_samples(draw_pi_samples(target, n, rng), group, theta, alpha);
}

struct GradientCheckResult {
  double max_rel_err_mu = 0.0;
  double max_rel_err_sigma = 0.0;
};

/// Central finite differences of the Monte Carlo w (common random numbers:
/// one pi-sample buffer, re-relabeled for every perturbed theta) against the
/// closed forms
///   grad_mu w    = -Sigma^{-1} h_mu,
///   grad_Sigma w = -1/2 Sigma^{-1} h_Sigma Sigma^{-1},
/// with h estimated from the same buffer. Sigma is perturbed along E_jj and
/// E_jk + E_kj; the directional derivative along the latter equals twice the
/// (j,k) gradient entry. Returns block-wise relative errors in Frobenius
/// norm.
inline GradientCheckResult gradient_identity_check(const SymmetrizedTarget& target,
                                                   const PermutationGroup& group,
                                                   const AdaptiveState& theta,
                                                   double alpha, long n,
                                                   double fd_step, RngStream& rng) {
  const double margin = theta_margin(group, theta);
  require(fd_step > 0.0 && (margin == kInf || fd_step <= margin / 10.0),
          "gradient_identity_check: fd_step must lie in (0, margin/10]");
  require(fd_step < 0.5 * min_eigenvalue(theta.sigma()),
          "gradient_identity_check: fd_step too large for a PD perturbation");
  require(n >= 2, "gradient_identity_check: need n >= 2");

  const int d = theta.dim();
  const Matrix buffer = draw_pi_samples(target, n, rng);

  const MomentEstimate moments = moments_of(relabel_samples(buffer, group, theta));
  const MeanFieldValue h = mean_field(theta, alpha, moments, group);
  const Vector grad_mu_cf = -theta.solve(h.h_mu);
  const Matrix sinv_h = theta.chol().solve(h.h_sigma);
  const Matrix grad_sigma_cf =
      -0.5 * symmetrize(theta.chol().solve(sinv_h.transpose()).transpose());

  auto w_at = [&](const Vector& mu, const Matrix& sigma) {
    return detail::lyapunov_on_samples(buffer, group, AdaptiveState(mu, sigma), alpha);
  };

  Vector grad_mu_fd(d);
  for (int j = 0; j < d; ++j) {
    Vector lo = theta.mu(), hi = theta.mu();
    hi[j] += fd_step;
    lo[j] -= fd_step;
    grad_mu_fd[j] =
        (w_at(hi, theta.sigma()) - w_at(lo, theta.sigma())) / (2.0 * fd_step);
  }

  Matrix grad_sigma_fd(d, d);
  for (int j = 0; j < d; ++j) {
    for (int k = j; k < d; ++k) {
      Matrix dir = Matrix::Zero(d, d);
      dir(j, k) += 1.0;
      dir(k, j) += 1.0;  // E_jj doubles on the diagonal
      const double directional =
          (w_at(theta.mu(), theta.sigma() + fd_step * dir) -
           w_at(theta.mu(), theta.sigma() - fd_step * dir)) /
          (2.0 * fd_step);
      // directional = <grad, dir> = 2 * grad_jk (and 2 * grad_jj on the diagonal)
      grad_sigma_fd(j, k) = directional / 2.0;
      grad_sigma_fd(k, j) = grad_sigma_fd(j, k);
    }
  }

  GradientCheckResult result;
  result.max_rel_err_mu =
      (grad_mu_fd - grad_mu_cf).norm() / std::max(grad_mu_cf.norm(), 1e-300);
  result.max_rel_err_sigma =
      (grad_sigma_fd - grad_sigma_cf).norm() / std::max(grad_sigma_cf.norm(), 1e-300);
  return result;
}

struct DescentEstimate {
  double value = 0.0;
  double stderr_value = 0.0;
};

/// Closed-form estimate of <grad w, h> = -h_mu^T Sigma^{-1} h_mu
/// - 1/2 Trace(Sigma^{-1} h_Sigma Sigma^{-1} h_Sigma), which is <= 0 on Theta
/// with equality only at mean-field zeros. The standard error comes from
/// batch means over the Monte Carlo buffer.
inline DescentEstimate descent_check(const SymmetrizedTarget& target,
                                     const PermutationGroup& group,
                                     const AdaptiveState& theta, double alpha,
                                     long n, RngStream& rng, int batches = 10) {
  require(n >= 2 * batches && batches >= 2, "descent_check: need n >= 2 * batches");
  const Matrix buffer = relabel_samples(draw_pi_samples(target, n, rng), group, theta);

  auto value_of = [&](const Matrix& block) {
    const MeanFieldValue h = mean_field(theta, alpha, moments_of(block), group);
    const Matrix m = theta.chol().solve(h.h_sigma);
    return -h.h_mu.dot(theta.solve(h.h_mu)) - 0.5 * (m * m).trace();
  };

  DescentEstimate est;
  est.value = value_of(buffer);
  const long per = n / batches;
  std::vector<double> batch_values;
  batch_values.reserve(static_cast<std::size_t>(batches));
  for (int b = 0; b < batches; ++b)
    batch_values.push_back(value_of(buffer.middleRows(b * per, per)));
  double mean = 0.0;
  for (double v : batch_values) mean += v;
  mean /= static_cast<double>(batches);
  double var = 0.0;
  for (double v : batch_values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(batches - 1);
  est.stderr_value = std::sqrt(var / static_cast<double>(batches));
  return est;
}

struct Histogram {
  Vector edges;               // bins + 1 edges
  std::vector<long> counts;   // per-bin counts
  long underflow = 0;
  long overflow = 0;

  long total() const {
    long t = underflow + overflow;
    for (long c : counts) t += c;
    return t;
  }
};

/// Histogram of one coordinate of the rows of `samples` over [lo, hi).
/// Values below lo / at or above hi land in the under/overflow bins, except
/// that hi itself is counted in the last bin.
inline Histogram marginal_histogram(const Matrix& samples, int coord, int bins,
                                    double lo, double hi) {
  require(samples.rows() >= 1, "marginal_histogram: empty sample");
  require(bins >= 1, "marginal_histogram: bins must be >= 1");
  require(coord >= 0 && coord < samples.cols(), "marginal_histogram: bad coordinate");
  require(hi > lo, "marginal_histogram: empty range");
  Histogram h;
  h.edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (int b = 0; b <= bins; ++b) h.edges[b] = lo + width * static_cast<double>(b);
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (long i = 0; i < samples.rows(); ++i) {
    const double v = samples(i, coord);
    if (v < lo) {
      ++h.underflow;
    } else if (v > hi) {
      ++h.overflow;
    } else {
      auto b = static_cast<long>((v - lo) / width);
      if (b >= bins) b = bins - 1;
      ++h.counts[static_cast<std::size_t>(b)];
    }
  }
  return h;
}

/// Kolmogorov-Smirnov sup distance between the empirical cdf of the sorted
/// sample and a reference cdf.
inline double ks_statistic(const std::vector<double>& sorted_samples,
                           const std::function<double(double)>& cdf) {
  const auto n = static_cast<double>(sorted_samples.size());
  require(!sorted_samples.empty(), "ks_statistic: empty sample");
  double dist = 0.0;
  for (std::size_t i = 0; i < sorted_samples.size(); ++i) {
    const double f = cdf(sorted_samples[i]);
    dist = std::max(dist, std::max(f - static_cast<double>(i) / n,
                                   static_cast<double>(i + 1) / n - f));
  }
  return dist;
}

inline double skewness(const std::vector<double>& values) {
  const auto n = static_cast<double>(values.size());
  require(values.size() >= 3, "skewness: need at least 3 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  require(m2 > 0.0, "skewness: zero variance");
  return m3 / std::pow(m2, 1.5);
}

namespace detail {

/// Max deviation of the points above their greatest convex minorant
/// (lower convex hull), evaluated over prefix windows: dev[m] is the
/// deviation for the window [0..m]. One incremental Andrew scan; on each pop
/// the deviations of the covered points are refreshed against the new chord.
inline std::vector<double> prefix_convexity_deviation(const std::vector<double>& x,
                                                      const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<std::size_t> hull;
  std::vector<double> dev(n, 0.0);
  double worst = 0.0;
  auto chord = [&](std::size_t a, std::size_t b, std::size_t i) {
    if (x[b] == x[a]) return std::max(y[a], y[b]);
    const double t = (x[i] - x[a]) / (x[b] - x[a]);
    return y[a] + t * (y[b] - y[a]);
  };
  for (std::size_t i = 0; i < n; ++i) {
    while (hull.size() >= 2) {
      const std::size_t b = hull[hull.size() - 1];
      const std::size_t a = hull[hull.size() - 2];
      const double cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a]);
      if (cross < 0.0)
        hull.pop_back();  // b lies above chord(a, i): no longer a hull vertex
      else
        break;
    }
    hull.push_back(i);
    // refresh deviations between the last two hull vertices
    if (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2];
      for (std::size_t j = a + 1; j < i; ++j)
        worst = std::max(worst, y[j] - chord(a, i, j));
    }
    dev[i] = worst;
  }
  return dev;
}

}  // namespace detail

/// Departure-from-unimodality statistic in the spirit of Hartigan's dip:
/// half of the smallest, over mode positions m, of the larger of
///  - the deviation of the empirical cdf above its greatest convex minorant
///    left of m, and
///  - the deviation below its least concave majorant right of m.
/// Zero iff the empirical cdf is convex-then-concave at some split; grows
/// with the trough mass of a multimodal sample. Input must be sorted; tied
/// values are collapsed into single cdf steps (upper corners feed the convex
/// side, lower corners the concave side).
inline double dip_statistic(const std::vector<double>& sorted) {
  const std::size_t n = sorted.size();
  require(n >= 4, "dip_statistic: need at least 4 points");
  for (std::size_t i = 1; i < n; ++i)
    require(sorted[i - 1] <= sorted[i], "dip_statistic: input must be sorted");

  std::vector<double> x;
  std::vector<double> y_upper, y_lower;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
    x.push_back(sorted[i]);
    y_lower.push_back(static_cast<double>(i) / static_cast<double>(n));
    y_upper.push_back(static_cast<double>(j + 1) / static_cast<double>(n));
    i = j + 1;
  }
  const std::size_t m_count = x.size();
  if (m_count < 3) return 0.0;

  const std::vector<double> convex_dev = detail::prefix_convexity_deviation(x, y_upper);

  // concave side via the point reflection (x, y) -> (-x, -y) of the suffix
  std::vector<double> xr(m_count), yr(m_count);
  for (std::size_t i = 0; i < m_count; ++i) {
    xr[i] = -x[m_count - 1 - i];
    yr[i] = -y_lower[m_count - 1 - i];
  }
  const std::vector<double> concave_dev_rev = detail::prefix_convexity_deviation(xr, yr);

  double best = kInf;
  for (std::size_t m = 0; m < m_count; ++m) {
    const double left = convex_dev[m];
    const double right = concave_dev_rev[m_count - 1 - m];
    best = std::min(best, std::max(left, right));
  }
  return 0.5 * best;
}

/// Post-burn-in samples of a run as rows (records with t > burn_in).
inline Matrix chain_samples(const RunOutput& output, long burn_in) {
  const auto total = static_cast<long>(output.records.size());
  require(burn_in >= 0 && burn_in < total, "chain_samples: burn_in out of range");
  const int d = output.dim();
  Matrix samples(total - burn_in, d);
  long row = 0;
  for (const ChainRecord& rec : output.records)
    if (rec.t > burn_in) samples.row(row++) = rec.x;
  return samples;
}

inline std::vector<double> chain_coordinate(const RunOutput& output, long burn_in,
                                            int coord) {
  const Matrix samples = chain_samples(output, burn_in);
  std::vector<double> series(static_cast<std::size_t>(samples.rows()));
  for (long i = 0; i < samples.rows(); ++i)
    series[static_cast<std::size_t>(i)] = samples(i, coord);
  return series;
}

/// Standard normal cdf.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline std::function<double(double)> gaussian_cdf(double mean, double variance) {
  const double sd = std::sqrt(variance);
  return [mean, sd](double x) { return normal_cdf((x - mean) / sd); };
}

/// Group element whose action moves `mu` closest to `reference` in Euclidean
/// norm. Used to align a converged theta with the seed before marginal
/// comparisons.
inline std::size_t aligning_element(const PermutationGroup& group, const Vector& mu,
                                    const Vector& reference) {
  std::size_t best_index = 0;
  double best = kInf;
  for (std::size_t k = 0; k < group.size(); ++k) {
    const double dist = (apply_perm(group[k], mu) - reference).squaredNorm();
    if (dist < best) {
      best = dist;
      best_index = k;
    }
  }
  return best_index;
}

/// Per-coordinate KS statistics of the post-burn-in samples against the
/// Gaussian seed marginals, after applying the group element that aligns the
/// final mu of the run with the seed mean.
inline std::vector<double> aligned_marginal_ks(const RunOutput& output,
                                               const GaussianSeed& seed,
                                               const PermutationGroup& group,
                                               long burn_in) {
  const std::size_t align =
      aligning_element(group, output.final_theta.mu(), seed.mean());
  const Matrix raw = chain_samples(output, burn_in);
  std::vector<double> ks(static_cast<std::size_t>(raw.cols()));
  Vector x(raw.cols());
  Matrix aligned(raw.rows(), raw.cols());
  for (long i = 0; i < raw.rows(); ++i) {
    x = raw.row(i);
    aligned.row(i) = apply_perm(group[align], x);
  }
  for (int c = 0; c < raw.cols(); ++c) {
    std::vector<double> column(static_cast<std::size_t>(aligned.rows()));
    for (long i = 0; i < aligned.rows(); ++i)
      column[static_cast<std::size_t>(i)] = aligned(i, c);
    std::sort(column.begin(), column.end());
    ks[static_cast<std::size_t>(c)] =
        ks_statistic(column, gaussian_cdf(seed.mean()[c], seed.cov()(c, c)));
  }
  return ks;
}

}  // namespace amor
