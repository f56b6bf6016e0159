#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "switchbound/common.hpp"
#include "switchbound/rate_matrix.hpp"

namespace switchbound {

/// exp(A) by scaling and squaring: A is scaled by 2^-s so that its infinity
/// norm is at most 0.5, the Taylor series is summed until the next term falls
/// below machine precision relative to the partial sum, and the result is
/// squared s times.
inline DenseMatrix matrix_exponential(const DenseMatrix& a) {
  require(a.rows() == a.cols(), "matrix_exponential: square matrix required");
  const Eigen::Index n = a.rows();
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const DenseMatrix scaled = a / std::ldexp(1.0, squarings);

  DenseMatrix sum = DenseMatrix::Identity(n, n);
  DenseMatrix term = DenseMatrix::Identity(n, n);
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (int k = 1; k < 64; ++k) {
    term = term * scaled / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() <= eps * sum.cwiseAbs().maxCoeff()) break;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

/// Transition matrix exp(tQ). Entries in [-1e-14, 0) are clamped to 0.
inline DenseMatrix transition_semigroup(const RateMatrix& q, double t) {
  require(t >= 0.0 && std::isfinite(t), "transition_semigroup: t must be finite and nonnegative");
  DenseMatrix p = matrix_exponential(q.to_dense() * t);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (p(i, j) < 0.0 && p(i, j) >= -1e-14) p(i, j) = 0.0;
    }
  }
  return p;
}

/// Unique invariant law of an irreducible generator, from the least-squares
/// solution of [Q^T; 1^T] pi = [0; 1].
inline ProbabilityVector invariant_measure(const RateMatrix& q) {
  require(is_irreducible(q), "invariant_measure: generator is reducible");
  const auto n = static_cast<Eigen::Index>(q.size());
  DenseMatrix system(n + 1, n);
  system.topRows(n) = q.to_dense().transpose();
  system.row(n).setOnes();
  DenseVector rhs = DenseVector::Zero(n + 1);
  rhs(n) = 1.0;
  DenseVector pi = system.colPivHouseholderQr().solve(rhs);
  std::vector<double> w(static_cast<std::size_t>(n));
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] = std::max(pi(i), 0.0);
    total += w[static_cast<std::size_t>(i)];
  }
  for (double& v : w) v /= total;
  return ProbabilityVector(std::move(w));
}

/// ||pi Q||_1, the stationarity residual.
inline double stationarity_residual(const RateMatrix& q, const ProbabilityVector& pi) {
  DenseVector row(static_cast<Eigen::Index>(pi.size()));
  for (std::size_t i = 0; i < pi.size(); ++i) row(static_cast<Eigen::Index>(i)) = pi[i];
  return (q.to_dense().transpose() * row).cwiseAbs().sum();
}

/// Half the largest l1 distance between two rows of a stochastic matrix.
inline double contraction_coefficient(const DenseMatrix& p) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < p.rows(); ++j) best = std::max(best, (p.row(i) - p.row(j)).cwiseAbs().sum());
  }
  return 0.5 * best;
}

struct ErgodicityProfile {
  std::vector<double> times;
  std::vector<double> beta;
  double tau1 = kInfinity;   // first time beta(t) <= 1/e; +inf if never on the grid
  double grid_max = 0.0;     // largest grid time examined
};

/// beta(t) = 1/2 max_{i,j} ||(e_i - e_j) exp(tQ)||_1 on the grid, and tau1
/// located by bisection between the bracketing grid points (tolerance 1e-11).
inline ErgodicityProfile ergodicity_profile(const RateMatrix& q, std::span<const double> t_grid) {
  require(!t_grid.empty(), "ergodicity_profile: empty grid");
  const double target = std::exp(-1.0);
  auto beta_at = [&](double t) { return contraction_coefficient(transition_semigroup(q, t)); };

  ErgodicityProfile out;
  out.times.assign(t_grid.begin(), t_grid.end());
  out.beta.reserve(t_grid.size());
  double prev_t = 0.0;
  bool found = false;
  for (double t : t_grid) {
    require(t >= prev_t, "ergodicity_profile: grid must be increasing");
    const double b = beta_at(t);
    out.beta.push_back(b);
    if (!found && b <= target) {
      double lo = prev_t, hi = t;
      while (hi - lo > 1e-11) {
        const double mid = 0.5 * (lo + hi);
        if (beta_at(mid) <= target) hi = mid; else lo = mid;
      }
      out.tau1 = hi;
      found = true;
    }
    if (!found) prev_t = t;
  }
  out.grid_max = t_grid.back();
  return out;
}

}  // namespace switchbound
