#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace switchbound {

/// States are 0-based everywhere in the API. Every text format (reports,
/// CSV, dumps, diagnostics) prints them 1-based.
using State = std::size_t;

using DenseMatrix = Eigen::MatrixXd;
using DenseVector = Eigen::VectorXd;

/// Dense linear algebra refuses generators larger than this.
inline constexpr std::size_t kMaxDenseStates = 10000;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Raised when an input breaks a documented precondition.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an internal guarantee fails at runtime (a bug, not bad input).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

/// Neumaier-compensated running sum. Summation order is the caller's.
class CompensatedSum {
 public:
  void add(double value) {
    const double t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value)) {
      compensation_ += (sum_ - t) + value;
    } else {
      compensation_ += (value - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

/// 1 - (1 - e^{-x})/x for x >= 0, with the x -> 0 limit 0.
///
/// This is the time average of 1 - e^{-s} over [0, 1] rescaled, and it shows
/// up in every closed-form bound on the disagreement functional.
inline double one_minus_mean_exp(double x) {
  if (x <= 0.0) return 0.0;
  if (x < 1e-2) {
    // x/2 - x^2/6 + x^3/24 - x^4/120 + x^5/720 - x^6/5040
    double term = x / 2.0;
    double sum = term;
    for (int k = 3; k <= 8; ++k) {
      term *= -x / k;
      sum += term;
    }
    return sum;
  }
  return (x + std::expm1(-x)) / x;
}

}  // namespace switchbound
