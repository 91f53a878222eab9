#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include "amor/common.hpp"

namespace amor {

/// A coordinate permutation of R^d stored as an index map:
/// (P x)_i = x[image[i]].
struct Permutation {
  std::vector<int> image;

  int dim() const { return static_cast<int>(image.size()); }

  bool is_identity() const {
    for (int i = 0; i < dim(); ++i)
      if (image[i] != i) return false;
    return true;
  }

  bool operator==(const Permutation& other) const { return image == other.image; }
  bool operator<(const Permutation& other) const { return image < other.image; }

  static Permutation identity(int d) {
    Permutation p;
    p.image.resize(static_cast<std::size_t>(d));
    std::iota(p.image.begin(), p.image.end(), 0);
    return p;
  }

  static Permutation transposition(int d, int i, int j) {
    Permutation p = identity(d);
    std::swap(p.image[static_cast<std::size_t>(i)],
              p.image[static_cast<std::size_t>(j)]);
    return p;
  }

  /// Validates that `image` is a bijection on {0, ..., d-1}.
  static Permutation from_image(std::vector<int> image) {
    const int d = static_cast<int>(image.size());
    std::vector<bool> seen(static_cast<std::size_t>(d), false);
    for (int v : image) {
      require(v >= 0 && v < d, "permutation image entry out of range");
      require(!seen[static_cast<std::size_t>(v)],
              "permutation image has a repeated entry");
      seen[static_cast<std::size_t>(v)] = true;
    }
    Permutation p;
    p.image = std::move(image);
    return p;
  }
};

inline Vector apply_perm(const Permutation& p, const Vector& x) {
  require_dim(x.size() == p.dim(), "apply_perm: dimension mismatch");
  Vector y(x.size());
  for (int i = 0; i < p.dim(); ++i) y[i] = x[p.image[static_cast<std::size_t>(i)]];
  return y;
}

/// Conjugation P A P^T done as a pure index gather (no arithmetic):
/// (P A P^T)_{ij} = A[image[i]][image[j]].
inline Matrix conjugate_matrix(const Permutation& p, const Matrix& a) {
  require_dim(a.rows() == p.dim() && a.cols() == p.dim(),
              "conjugate_matrix: dimension mismatch");
  Matrix b(a.rows(), a.cols());
  for (int i = 0; i < p.dim(); ++i)
    for (int j = 0; j < p.dim(); ++j)
      b(i, j) = a(p.image[static_cast<std::size_t>(i)],
                  p.image[static_cast<std::size_t>(j)]);
  return b;
}

/// (p * q)(x) = p(q(x)).
inline Permutation compose(const Permutation& p, const Permutation& q) {
  require_dim(p.dim() == q.dim(), "compose: dimension mismatch");
  Permutation r;
  r.image.resize(p.image.size());
  for (int i = 0; i < p.dim(); ++i)
    r.image[static_cast<std::size_t>(i)] =
        q.image[static_cast<std::size_t>(p.image[static_cast<std::size_t>(i)])];
  return r;
}

inline Permutation inverse(const Permutation& p) {
  Permutation r;
  r.image.resize(p.image.size());
  for (int i = 0; i < p.dim(); ++i)
    r.image[static_cast<std::size_t>(p.image[static_cast<std::size_t>(i)])] = i;
  return r;
}

/// Explicit matrix of the permutation, P x = apply_perm(p, x).
/// Materialized only in tests and in U_P computations.
inline Matrix perm_matrix(const Permutation& p) {
  Matrix m = Matrix::Zero(p.dim(), p.dim());
  for (int i = 0; i < p.dim(); ++i)
    m(i, p.image[static_cast<std::size_t>(i)]) = 1.0;
  return m;
}

/// U_P = (I - P)^T (I - P), symmetric positive semidefinite.
inline Matrix residual_gram(const Permutation& p) {
  const Matrix imp = Matrix::Identity(p.dim(), p.dim()) - perm_matrix(p);
  return imp.transpose() * imp;
}

/// A finite group of coordinate permutations acting on R^d.
/// `elements` always holds the identity first; the rest keep the insertion
/// order of the generating closure so tie-breaking draws are reproducible.
/// Immutable after construction and safe to share across threads.
struct PermutationGroup {
  std::vector<Permutation> elements;
  int dim = 0;

  std::size_t size() const { return elements.size(); }
  const Permutation& operator[](std::size_t i) const { return elements[i]; }
};

inline constexpr std::size_t kGroupSizeCap = 10080;

inline PermutationGroup trivial_group(int d) {
  PermutationGroup g;
  g.dim = d;
  g.elements.push_back(Permutation::identity(d));
  return g;
}

/// Closure of `gens` under composition (inverses come for free in a finite
/// setting: every element has finite order). Errors out beyond `cap` elements.
inline PermutationGroup group_from_generators(const std::vector<Permutation>& gens,
                                              int d,
                                              std::size_t cap = kGroupSizeCap) {
  PermutationGroup g = trivial_group(d);
  std::map<std::vector<int>, std::size_t> index;
  index.emplace(g.elements[0].image, 0);

  for (const Permutation& gen : gens)
    require_dim(gen.dim() == d, "group_from_generators: generator dimension mismatch");

  std::size_t next = 0;
  auto insert = [&](Permutation p) {
    if (index.count(p.image)) return;
    require(g.elements.size() < cap,
            "group closure exceeds the element cap (" + std::to_string(cap) + ")");
    index.emplace(p.image, g.elements.size());
    g.elements.push_back(std::move(p));
  };
  for (const Permutation& gen : gens) insert(gen);
  while (next < g.elements.size()) {
    const Permutation current = g.elements[next++];
    for (const Permutation& gen : gens) {
      insert(compose(gen, current));
      insert(compose(current, gen));
    }
  }
  return g;
}

/// All d! coordinate permutations, identity first, lexicographic image order.
inline PermutationGroup full_symmetric_group(int d) {
  require(d >= 1 && d <= 7,
          "full_symmetric_group: d must be in [1, 7] (d! blows up beyond)");
  PermutationGroup g;
  g.dim = d;
  std::vector<int> image(static_cast<std::size_t>(d));
  std::iota(image.begin(), image.end(), 0);
  do {
    g.elements.push_back(Permutation::from_image(image));
  } while (std::next_permutation(image.begin(), image.end()));
  return g;
}

/// Exhaustive finite-group check: identity first, closure under composition
/// and inverse, no duplicates. O(|G|^2 d); meant for validation and tests.
inline bool is_valid_group(const PermutationGroup& g) {
  if (g.elements.empty() || !g.elements[0].is_identity()) return false;
  std::map<std::vector<int>, int> index;
  for (const Permutation& p : g.elements) {
    if (p.dim() != g.dim) return false;
    if (!index.emplace(p.image, 1).second) return false;  // duplicate
  }
  for (const Permutation& p : g.elements) {
    if (!index.count(inverse(p).image)) return false;
    for (const Permutation& q : g.elements)
      if (!index.count(compose(p, q).image)) return false;
  }
  return true;
}

}  // namespace amor
