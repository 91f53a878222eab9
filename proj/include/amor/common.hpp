#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

namespace amor {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112352;
inline constexpr double kTwoPi = 6.2831853071795864769252867665590058;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Base class of every exception thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Mismatched vector/matrix dimensions.
struct DimensionError : Error {
  using Error::Error;
};

/// A numeric operation failed. `step` names the operation; `iteration` is the
/// chain iteration at which it failed (-1 outside a sampler loop).
struct NumericError : Error {
  NumericError(std::string step_, long iteration_, std::string detail_)
      : Error(compose(step_, iteration_, detail_)),
        step(std::move(step_)),
        iteration(iteration_),
        detail(std::move(detail_)) {}

  std::string step;
  long iteration;
  std::string detail;

 private:
  static std::string compose(const std::string& step, long iteration,
                             const std::string& detail) {
    std::string msg = "numeric error in step '" + step + "'";
    if (iteration >= 0) msg += " at iteration " + std::to_string(iteration);
    msg += ": " + detail;
    return msg;
  }
};

/// Problem in a config or trace file. `line` is 1-based (0 = whole file).
struct ConfigError : Error {
  ConfigError(int line_, const std::string& detail)
      : Error("line " + std::to_string(line_) + ": " + detail), line(line_) {}

  int line;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

inline void require_dim(bool cond, const std::string& msg) {
  if (!cond) throw DimensionError(msg);
}

/// log(sum_i exp(v_i)). Returns -inf on an all-(-inf) input and returns v[0]
/// unchanged for n == 1 (no rounding is introduced for a single term).
inline double log_sum_exp(const double* v, std::size_t n) {
  double m = -kInf;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

inline Matrix symmetrize(const Matrix& a) {
  return 0.5 * (a + a.transpose());
}

inline bool approx_symmetric(const Matrix& a, double rel_tol) {
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

inline double min_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Bit-level equality (distinguishes -0.0 from +0.0, unlike operator==).
inline bool bits_equal(const Vector& a, const Vector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

inline bool bits_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

/// Shortest decimal that round-trips to the same double (std::to_chars).
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Strict double parse of a whole token; false on trailing garbage.
inline bool parse_double(const std::string& token, double& out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

inline bool parse_long(const std::string& token, long& out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

inline bool parse_uint64(const std::string& token, std::uint64_t& out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

}  // namespace amor
