#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "switchbound/switchbound.hpp"

namespace sbtest {

using namespace switchbound;

inline DenseMatrix table(std::initializer_list<std::initializer_list<double>> rows) {
  DenseMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline RateMatrix gen(std::initializer_list<std::initializer_list<double>> rows) {
  return RateMatrix::from_off_diagonal(table(rows));
}

inline RateMatrix two_state(double a, double b) { return gen({{-a, a}, {b, -b}}); }

// The 3-state example family and its envelopes.
inline DenseMatrix example_q_bar() { return table({{-5, 2, 3}, {1, -4, 3}, {1, 1, -2}}); }
inline DenseMatrix example_q_star() { return table({{-2, 1, 1}, {3, -4, 1}, {3, 2, -5}}); }

struct RandomPair {
  RateMatrix q;
  RateMatrix qt;
  std::size_t c0 = 1;
  double k0 = 1.0;
  State i0 = 0;
};

/// Irreducible banded generator: N in [2, 6], c0 in {1, 2}, K0 in {1, 2, 3},
/// every rate in [0, K0] and every nearest-neighbour rate at least K0/10.
inline RateMatrix random_banded(std::mt19937_64& rng, std::size_t n, std::size_t c0, double k0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return RateMatrix(n, c0, [&](std::size_t i, std::size_t j) {
    const std::size_t d = i > j ? i - j : j - i;
    if (d == 1) return k0 * (0.1 + 0.9 * u(rng));
    return u(rng) < 0.3 ? 0.0 : k0 * u(rng);
  });
}

/// Pair k of the randomized suite; deterministic in k.
inline RandomPair random_pair(std::size_t k) {
  std::mt19937_64 rng(0x5eed0000ULL + k);
  std::uniform_int_distribution<std::size_t> states(2, 6), band(1, 2), bound(1, 3);
  RandomPair p;
  const std::size_t n = states(rng);
  p.c0 = std::min(band(rng), n - 1);
  p.k0 = static_cast<double>(bound(rng));
  p.q = random_banded(rng, n, p.c0, p.k0);
  p.qt = random_banded(rng, n, p.c0, p.k0);
  p.i0 = k % n;
  return p;
}

/// q̃ = q with every off-diagonal rate scaled by (1 + eps·u), u uniform in [-1, 1].
inline RateMatrix scaled_perturbation(const RateMatrix& q, double eps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return RateMatrix(q.size(), q.bandwidth(), [&](std::size_t i, std::size_t j) { return q.rate(i, j) * (1.0 + eps * u(rng)); });
}

inline constexpr std::size_t kSuiteSize = 20;

inline StreamSpec test_stream(std::uint64_t scenario, std::uint64_t seed = 12345) {
  return StreamSpec{seed, {scenario, 0, kGlobalClockBlock}};
}

}  // namespace sbtest
