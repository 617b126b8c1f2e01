#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace respire {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Seeded generator used everywhere randomness is needed. Handles are never
/// shared between threads.
using Rng = std::mt19937_64;

inline constexpr double kPi = std::numbers::pi;

/// Input outside an operation's documented domain (bad bounds, limits, sizes).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical precondition failure, e.g. a covariance that is not SPD.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed text input; carries the 1-based line number of the offending line.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Normalizes an angle to (-pi, pi].
inline double wrap_angle(double a) {
  if (!std::isfinite(a)) return a;
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

/// Shortest signed difference a - b on the circle, in (-pi, pi].
inline double angle_diff(double a, double b) { return wrap_angle(a - b); }

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Throws NumericError otherwise.
template <typename Derived>
auto cholesky_factor(const Eigen::MatrixBase<Derived>& cov, const char* what = "covariance") {
  using Matrix = Eigen::Matrix<typename Derived::Scalar, Derived::RowsAtCompileTime,
                               Derived::ColsAtCompileTime>;
  Eigen::LLT<Matrix> llt(cov.eval());
  if (llt.info() != Eigen::Success || !cov.isApprox(cov.transpose(), 1e-9)) {
    throw NumericError(std::string(what) + " is not symmetric positive definite");
  }
  return Matrix(llt.matrixL());
}

/// Draws a standard normal vector of fixed size 2.
inline Vec2 standard_normal2(Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const double a = n01(rng);
  const double b = n01(rng);
  return {a, b};
}

}  // namespace respire
