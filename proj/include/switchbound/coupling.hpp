#pragma once

#include <algorithm>
#include <cstddef>

#include "switchbound/common.hpp"
#include "switchbound/rate_matrix.hpp"

namespace switchbound {

/// Index of the pair state (i, j) in the product space S x S.
inline std::size_t pair_index(std::size_t n, State i, State j) { return i * n + j; }

/// Generator of the pair (Λ, Λ̃) driven by the block interval layouts.
///
/// Apart (i != j) the chains occupy disjoint blocks and move independently:
/// (ij)->(kj) at q_ik and (ij)->(ik) at q̃_jk, never jointly. Together (i, i)
/// they share left endpoints: (ii)->(jj) at q_ij ∧ q̃_ij, (ii)->(ji) at
/// (q_ij - q̃_ij) ∨ 0 and (ii)->(ij) at (q̃_ij - q_ij) ∨ 0.
inline RateMatrix coupling_generator(const RateMatrix& q, const RateMatrix& qt) {
  require(q.size() == qt.size(), "coupling_generator: dimension mismatch");
  const std::size_t n = q.size();
  require(n * n <= kMaxDenseStates, "coupling_generator: product space too large");
  DenseMatrix g = DenseMatrix::Zero(static_cast<Eigen::Index>(n * n), static_cast<Eigen::Index>(n * n));
  for (State i = 0; i < n; ++i) {
    for (State j = 0; j < n; ++j) {
      const auto src = static_cast<Eigen::Index>(pair_index(n, i, j));
      if (i == j) {
        for (State k = 0; k < n; ++k) {
          if (k == i) continue;
          const double a = q.rate(i, k), b = qt.rate(i, k);
          g(src, static_cast<Eigen::Index>(pair_index(n, k, k))) += std::min(a, b);
          g(src, static_cast<Eigen::Index>(pair_index(n, k, i))) += std::max(a - b, 0.0);
          g(src, static_cast<Eigen::Index>(pair_index(n, i, k))) += std::max(b - a, 0.0);
        }
      } else {
        for (State k = 0; k < n; ++k) {
          if (k != i) g(src, static_cast<Eigen::Index>(pair_index(n, k, j))) += q.rate(i, k);
          if (k != j) g(src, static_cast<Eigen::Index>(pair_index(n, i, k))) += qt.rate(j, k);
        }
      }
    }
  }
  return RateMatrix::from_off_diagonal(g);
}

/// Basic coupling: (ij)->(kj) at (q_ik - q̃_jk) ∨ 0, (ij)->(ik) at
/// (q̃_jk - q_ik) ∨ 0 and (ij)->(kk) at q_ik ∧ q̃_jk, for every source.
/// Rates from a state to itself count as zero.
inline RateMatrix basic_coupling_generator(const RateMatrix& q, const RateMatrix& qt) {
  require(q.size() == qt.size(), "basic_coupling_generator: dimension mismatch");
  const std::size_t n = q.size();
  require(n * n <= kMaxDenseStates, "basic_coupling_generator: product space too large");
  DenseMatrix g = DenseMatrix::Zero(static_cast<Eigen::Index>(n * n), static_cast<Eigen::Index>(n * n));
  for (State i = 0; i < n; ++i) {
    for (State j = 0; j < n; ++j) {
      const auto src = static_cast<Eigen::Index>(pair_index(n, i, j));
      for (State k = 0; k < n; ++k) {
        const double a = q.rate(i, k), b = qt.rate(j, k);
        g(src, static_cast<Eigen::Index>(pair_index(n, k, j))) += std::max(a - b, 0.0);
        g(src, static_cast<Eigen::Index>(pair_index(n, i, k))) += std::max(b - a, 0.0);
        g(src, static_cast<Eigen::Index>(pair_index(n, k, k))) += std::min(a, b);
      }
      g(src, src) = 0.0;
    }
  }
  return RateMatrix::from_off_diagonal(g);
}

}  // namespace switchbound
