#pragma once

#include <utility>
#include <variant>
#include <vector>

#include "amor/common.hpp"
#include "amor/permgroup.hpp"
#include "amor/rng.hpp"

namespace amor {

/// Multivariate Gaussian building block with a cached Cholesky factor.
class GaussianSeed {
 public:
  GaussianSeed(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    require_dim(cov_.rows() == cov_.cols() && cov_.rows() == mean_.size(),
                "GaussianSeed: mean/cov dimension mismatch");
    require(mean_.allFinite() && cov_.allFinite(), "GaussianSeed: non-finite entries");
    if (!approx_symmetric(cov_, 1e-12))
      throw NumericError("gaussian_seed", -1, "cov is not symmetric");
    cov_ = symmetrize(cov_);
    llt_.compute(cov_);
    if (llt_.info() != Eigen::Success)
      throw NumericError("gaussian_seed", -1, "cov is not positive definite");
    log_norm_ = -0.5 * (static_cast<double>(mean_.size()) * kLog2Pi + log_det());
  }

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }

  double log_det() const {
    return 2.0 * Matrix(llt_.matrixL()).diagonal().array().log().sum();
  }

  double log_density(const Vector& x) const {
    require_dim(x.size() == mean_.size(), "GaussianSeed: dimension mismatch");
    require(x.allFinite(), "GaussianSeed: non-finite evaluation point");
    return log_norm_ - 0.5 * llt_.matrixL().solve(x - mean_).squaredNorm();
  }

  /// Exact draw: mean + L z with z standard normal (d normal draws).
  Vector sample(RngStream& rng) const {
    return mean_ + Matrix(llt_.matrixL()) * rng.normal_vector(mean_.size());
  }

 private:
  Vector mean_;
  Matrix cov_;
  Eigen::LLT<Matrix> llt_;
  double log_norm_ = 0.0;
};

namespace detail {

struct TwistedSeed {
  GaussianSeed base;
  double bend = 0.0;
};

struct MixtureSeed {
  std::vector<std::pair<double, GaussianSeed>> components;
};

}  // namespace detail

/// Seed density before symmetrization: a Gaussian, a "banana"-twisted
/// Gaussian, or a finite Gaussian mixture.
///
/// The twist is the volume-preserving shear
///   y = (x_0, x_1 + bend * (x_0^2 - C_00), x_2, ..., x_{d-1}),
/// applied to a Gaussian draw, with C_00 the seed's first variance. Density
/// evaluation applies the inverse shear; the Jacobian is one, so no
/// correction term appears.
class SeedDensity {
 public:
  static SeedDensity gaussian(GaussianSeed seed) {
    return SeedDensity(std::move(seed));
  }

  static SeedDensity twisted(GaussianSeed seed, double bend) {
    require(std::isfinite(bend), "twisted seed: bend must be finite");
    require(seed.dim() >= 2, "twisted seed: needs dimension >= 2");
    return SeedDensity(detail::TwistedSeed{std::move(seed), bend});
  }

  static SeedDensity mixture(std::vector<std::pair<double, GaussianSeed>> components) {
    require(!components.empty(), "mixture seed: no components");
    const int d = components.front().second.dim();
    double total = 0.0;
    for (const auto& [w, comp] : components) {
      require(w > 0.0, "mixture seed: weights must be positive");
      require_dim(comp.dim() == d, "mixture seed: component dimension mismatch");
      total += w;
    }
    require(std::abs(total - 1.0) <= 1e-12, "mixture seed: weights must sum to 1");
    return SeedDensity(detail::MixtureSeed{std::move(components)});
  }

  int dim() const {
    if (const auto* g = std::get_if<GaussianSeed>(&kind_)) return g->dim();
    if (const auto* t = std::get_if<detail::TwistedSeed>(&kind_)) return t->base.dim();
    return std::get<detail::MixtureSeed>(kind_).components.front().second.dim();
  }

  enum class Kind { kGaussian, kTwisted, kMixture };

  Kind kind() const {
    if (std::holds_alternative<GaussianSeed>(kind_)) return Kind::kGaussian;
    if (std::holds_alternative<detail::TwistedSeed>(kind_)) return Kind::kTwisted;
    return Kind::kMixture;
  }

  bool is_gaussian() const { return std::holds_alternative<GaussianSeed>(kind_); }

  const GaussianSeed& as_gaussian() const {
    require(is_gaussian(), "seed density is not a plain Gaussian");
    return std::get<GaussianSeed>(kind_);
  }

  /// Gaussian base of a gaussian or twisted seed.
  const GaussianSeed& base_gaussian() const {
    if (const auto* g = std::get_if<GaussianSeed>(&kind_)) return *g;
    require(kind() == Kind::kTwisted, "seed density has no single Gaussian base");
    return std::get<detail::TwistedSeed>(kind_).base;
  }

  double bend() const {
    require(kind() == Kind::kTwisted, "seed density is not twisted");
    return std::get<detail::TwistedSeed>(kind_).bend;
  }

  const std::vector<std::pair<double, GaussianSeed>>& components() const {
    require(kind() == Kind::kMixture, "seed density is not a mixture");
    return std::get<detail::MixtureSeed>(kind_).components;
  }

  double log_density(const Vector& x) const {
    require(x.allFinite(), "seed_log_density: non-finite evaluation point");
    if (const auto* g = std::get_if<GaussianSeed>(&kind_)) return g->log_density(x);
    if (const auto* t = std::get_if<detail::TwistedSeed>(&kind_)) {
      Vector u = x;
      u[1] -= t->bend * (x[0] * x[0] - t->base.cov()(0, 0));
      return t->base.log_density(u);
    }
    const auto& mix = std::get<detail::MixtureSeed>(kind_).components;
    std::vector<double> terms(mix.size());
    for (std::size_t k = 0; k < mix.size(); ++k)
      terms[k] = std::log(mix[k].first) + mix[k].second.log_density(x);
    return log_sum_exp(terms.data(), terms.size());
  }

  /// Draw order: mixture consumes one uniform (component pick) before the d
  /// normal draws; gaussian/twisted consume d normals only.
  Vector sample(RngStream& rng) const {
    if (const auto* g = std::get_if<GaussianSeed>(&kind_)) return g->sample(rng);
    if (const auto* t = std::get_if<detail::TwistedSeed>(&kind_)) {
      Vector x = t->base.sample(rng);
      x[1] += t->bend * (x[0] * x[0] - t->base.cov()(0, 0));
      return x;
    }
    const auto& mix = std::get<detail::MixtureSeed>(kind_).components;
    const double u = rng.uniform();
    double acc = 0.0;
    for (const auto& [w, comp] : mix) {
      acc += w;
      if (u < acc) return comp.sample(rng);
    }
    return mix.back().second.sample(rng);
  }

 private:
  template <typename T>
  explicit SeedDensity(T value) : kind_(std::move(value)) {}

  std::variant<GaussianSeed, detail::TwistedSeed, detail::MixtureSeed> kind_;
};

inline double seed_log_density(const SeedDensity& seed, const Vector& x) {
  return seed.log_density(x);
}

inline Vector sample_seed(const SeedDensity& seed, RngStream& rng) {
  return seed.sample(rng);
}

/// pi(x) = (1/|P|) sum_P seed(P x): a permutation-invariant density built by
/// group-averaging the seed. `support_radius > 0` truncates the density to
/// the centered ball of that radius (log-density -inf outside).
/// Immutable after construction; evaluation is pure and thread-safe.
struct SymmetrizedTarget {
  SeedDensity seed;
  PermutationGroup group;
  double support_radius = 0.0;

  int dim() const { return group.dim; }
};

inline double target_log_density(const SymmetrizedTarget& target, const Vector& x) {
  require_dim(x.size() == target.group.dim, "target_log_density: dimension mismatch");
  require(x.allFinite(), "target_log_density: non-finite evaluation point");
  if (target.support_radius > 0.0 && x.norm() > target.support_radius) return -kInf;
  const std::size_t n = target.group.size();
  std::vector<double> terms(n);
  for (std::size_t k = 0; k < n; ++k)
    terms[k] = target.seed.log_density(apply_perm(target.group[k], x));
  return log_sum_exp(terms.data(), n) - std::log(static_cast<double>(n));
}

/// Exact pi-draw: a seed draw pushed through a uniformly random group element
/// (rejection against the support ball when the target is truncated).
/// Draw order: seed draw first, then one uniform for the group element.
inline Vector sample_pi(const SymmetrizedTarget& target, RngStream& rng) {
  for (;;) {
    Vector x = target.seed.sample(rng);
    const std::size_t k = rng.uniform_index(target.group.size());
    if (target.support_radius > 0.0 && x.norm() > target.support_radius) continue;
    return apply_perm(target.group[k], x);
  }
}

/// The two-dimensional running example: seed mean (0, 2), covariance
/// [[16, -0.975], [-0.975, 1]], symmetrized over {id, swap}.
inline SymmetrizedTarget make_running_example_target() {
  Vector mean(2);
  mean << 0.0, 2.0;
  Matrix cov(2, 2);
  cov << 16.0, -0.975, -0.975, 1.0;
  return SymmetrizedTarget{SeedDensity::gaussian(GaussianSeed(mean, cov)),
                           full_symmetric_group(2)};
}

/// Twisted variant of the running example; bend = 0 recovers it exactly.
inline SymmetrizedTarget make_twisted_target(double bend) {
  Vector mean(2);
  mean << 0.0, 2.0;
  Matrix cov(2, 2);
  cov << 16.0, -0.975, -0.975, 1.0;
  return SymmetrizedTarget{SeedDensity::twisted(GaussianSeed(mean, cov), bend),
                           full_symmetric_group(2)};
}

/// Genuinely bimodal variant: equal-weight mixture of two well-separated
/// unit-covariance Gaussians, symmetrized over the swap group.
inline SymmetrizedTarget make_bimodal_target() {
  Vector m1(2), m2(2);
  m1 << 0.0, 2.0;
  m2 << 4.0, 6.0;
  const Matrix eye = Matrix::Identity(2, 2);
  std::vector<std::pair<double, GaussianSeed>> comps;
  comps.emplace_back(0.5, GaussianSeed(m1, eye));
  comps.emplace_back(0.5, GaussianSeed(m2, eye));
  return SymmetrizedTarget{SeedDensity::mixture(std::move(comps)),
                           full_symmetric_group(2)};
}

}  // namespace amor
