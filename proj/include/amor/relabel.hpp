#pragma once

#include <utility>
#include <vector>

#include "amor/common.hpp"
#include "amor/permgroup.hpp"
#include "amor/rng.hpp"

namespace amor {

/// theta = (mu, Sigma): running mean and symmetric positive-definite
/// covariance, jointly the relabeling parameter and the proposal shape.
/// The Cholesky factor is computed once at construction.
class AdaptiveState {
 public:
  AdaptiveState(Vector mu, Matrix sigma) : mu_(std::move(mu)), sigma_(std::move(sigma)) {
    require_dim(sigma_.rows() == sigma_.cols() && sigma_.rows() == mu_.size(),
                "AdaptiveState: mu/sigma dimension mismatch");
    require(mu_.allFinite() && sigma_.allFinite(), "AdaptiveState: non-finite entries");
    if (!approx_symmetric(sigma_, 1e-12))
      throw NumericError("adaptive_state", -1, "sigma is not symmetric");
    sigma_ = symmetrize(sigma_);
    llt_.compute(sigma_);
    if (llt_.info() != Eigen::Success)
      throw NumericError("adaptive_state", -1,
                         "sigma is not positive definite (Cholesky failed)");
    log_det_ = 2.0 * Matrix(llt_.matrixL()).diagonal().array().log().sum();
  }

  int dim() const { return static_cast<int>(mu_.size()); }
  const Vector& mu() const { return mu_; }
  const Matrix& sigma() const { return sigma_; }
  const Eigen::LLT<Matrix>& chol() const { return llt_; }

  double log_det_sigma() const { return log_det_; }

  /// Sigma^{-1} v by Cholesky solve; Sigma^{-1} is never formed.
  Vector solve(const Vector& v) const { return llt_.solve(v); }

 private:
  Vector mu_;
  Matrix sigma_;
  Eigen::LLT<Matrix> llt_;
  double log_det_ = 0.0;
};

/// (P mu, P Sigma P^T). The covariance conjugation is an index gather, so the
/// output entries are bitwise copies of the input entries.
inline AdaptiveState conjugate_state(const Permutation& p, const AdaptiveState& theta) {
  return AdaptiveState(apply_perm(p, theta.mu()), conjugate_matrix(p, theta.sigma()));
}

/// Relabeling criterion L_theta(x) = (x - mu)^T Sigma^{-1} (x - mu) >= 0.
inline double criterion(const AdaptiveState& theta, const Vector& x) {
  require_dim(x.size() == theta.mu().size(), "criterion: dimension mismatch");
  return theta.chol().matrixL().solve(x - theta.mu()).squaredNorm();
}

struct RelabelResult {
  std::size_t perm_index = 0;
  Vector relabeled_x;
  int tie_count = 1;
};

/// Minimizes L_theta(P x) over the group. Permutations whose criterion lies
/// within `tie_tol` (absolute) of the minimum form the tie set; a uniform
/// draw picks among them. No randomness is consumed when the set is a
/// singleton.
inline RelabelResult optimal_permutation(const PermutationGroup& group,
                                         const AdaptiveState& theta,
                                         const Vector& x, double tie_tol,
                                         RngStream& rng) {
  require(tie_tol >= 0.0, "optimal_permutation: tie_tol must be >= 0");
  const std::size_t n = group.size();
  std::vector<double> values(n);
  double best = kInf;
  for (std::size_t k = 0; k < n; ++k) {
    values[k] = criterion(theta, apply_perm(group[k], x));
    best = std::min(best, values[k]);
  }
  std::vector<std::size_t> ties;
  for (std::size_t k = 0; k < n; ++k)
    if (values[k] - best <= tie_tol) ties.push_back(k);

  RelabelResult result;
  result.tie_count = static_cast<int>(ties.size());
  result.perm_index = ties.size() == 1 ? ties[0] : ties[rng.uniform_index(ties.size())];
  result.relabeled_x = apply_perm(group[result.perm_index], x);
  return result;
}

/// Membership in the Voronoi cell V_theta: L_theta(x) <= L_theta(P x) for
/// every P in the group (non-strict).
inline bool in_voronoi(const PermutationGroup& group, const AdaptiveState& theta,
                       const Vector& x) {
  const double own = criterion(theta, x);
  for (std::size_t k = 0; k < group.size(); ++k) {
    if (group[k].is_identity()) continue;
    if (own > criterion(theta, apply_perm(group[k], x))) return false;
  }
  return true;
}

/// inf over non-identity P of ||(I - P) Sigma^{-1} mu||; strictly positive iff
/// theta lies in the parameter set Theta. +inf for the trivial group.
inline double theta_margin(const PermutationGroup& group, const AdaptiveState& theta) {
  const Vector s = theta.solve(theta.mu());
  double margin = kInf;
  for (std::size_t k = 0; k < group.size(); ++k) {
    if (group[k].is_identity()) continue;
    margin = std::min(margin, (s - apply_perm(group[k], s)).norm());
  }
  return margin;
}

}  // namespace amor
