#pragma once

#include <random>

#include "amor/common.hpp"

namespace amor {

/// Deterministic random stream shared by the samplers and the Monte Carlo
/// oracles.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. All variate mappings live here instead of std::*_distribution
/// (whose algorithms are implementation-defined), so a (seed, call sequence)
/// pair reproduces bit-identical streams on any conforming standard library.
///
/// Engine-call accounting per draw:
///   uniform()        1 call, value in [0, 1)
///   normal()         2 calls (Box-Muller, cosine branch)
///   uniform_index(n) 1 call
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log() finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  Vector normal_vector(Eigen::Index n) {
    Vector z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal();
    return z;
  }

  /// Uniform draw over {0, ..., n-1}.
  std::size_t uniform_index(std::size_t n) {
    require(n > 0, "uniform_index: empty range");
    const auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace amor
