#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"

using namespace sbtest;

namespace {

LayoutEntry example_row(State i, double x) {
  const auto spec = distance_saturation_family(3);
  std::vector<double> row(3);
  const double p[1] = {x};
  for (State j = 0; j < 3; ++j) row[j] = j == i ? 0.0 : spec.rate(i, j, StatePoint(p, 1));
  return build_comparison_entry(i, 0, row, 2);
}

void expect_interval(const LayoutEntry& e, State target, double lo, double hi) {
  for (const auto& iv : e.intervals) {
    if (iv.target != target) continue;
    EXPECT_EQ(iv.lo, lo);
    EXPECT_EQ(iv.hi(), hi);
    return;
  }
  ADD_FAILURE() << "no interval for target " << target + 1;
}

// Union of the intervals of targets selected by `keep`, as one [lo, hi) span;
// fails if the selection is not contiguous.
std::pair<double, double> span_of(const LayoutEntry& e, const std::function<bool(State)>& keep) {
  double lo = kInfinity, hi = -kInfinity, length = 0.0;
  for (const auto& iv : e.intervals) {
    if (!keep(iv.target)) continue;
    lo = std::min(lo, iv.lo);
    hi = std::max(hi, iv.hi());
    length += iv.length;
  }
  if (length == 0.0) return {0.0, 0.0};
  EXPECT_NEAR(hi - lo, length, 1e-12);
  return {lo, hi};
}

bool contains(std::pair<double, double> outer, std::pair<double, double> inner) {
  if (inner.second - inner.first <= 0.0) return true;
  return outer.first <= inner.first + 1e-12 && inner.second <= outer.second + 1e-12;
}

// Random banded state-dependent rates a_ij + b_ij sin^2(x) with their exact envelope.
StateDependentRateSpec random_spec(std::uint64_t seed, std::size_t n, std::size_t band) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto a = std::make_shared<DenseMatrix>(DenseMatrix::Zero(n, n));
  auto b = std::make_shared<DenseMatrix>(DenseMatrix::Zero(n, n));
  for (State i = 0; i < n; ++i) {
    for (State j = 0; j < n; ++j) {
      const std::size_t d = i > j ? i - j : j - i;
      if (d == 0 || d > band) continue;
      (*a)(i, j) = u(rng) < 0.2 ? 0.0 : u(rng);
      (*b)(i, j) = u(rng);
    }
  }
  StateDependentRateSpec spec;
  spec.n_states = n;
  spec.bandwidth = band;
  spec.rate = [a, b](State i, State j, StatePoint x) {
    const double s = std::sin(x[0]);
    return (*a)(i, j) + (*b)(i, j) * s * s;
  };
  spec.envelope = [a, b](State i, State j) { return RateRange{(*a)(i, j), (*a)(i, j) + (*b)(i, j)}; };
  spec.k0 = 2.0 * static_cast<double>(2 * band);
  return spec;
}

LayoutEntry row_at(const StateDependentRateSpec& spec, State i, double x) {
  const std::size_t n = *spec.n_states;
  std::vector<double> row(n, 0.0);
  const double p[1] = {x};
  for (State j = 0; j < n; ++j) {
    if (j != i) row[j] = spec.rate(i, j, StatePoint(p, 1));
  }
  return build_comparison_entry(i, 0, row, spec.bandwidth);
}

}  // namespace

TEST(Classical, ConsecutiveRows) {
  const auto l = build_classical_layout(gen({{-1, 1}, {2, -2}}));
  expect_interval(l.entry(0), 1, 0.0, 1.0);
  expect_interval(l.entry(1), 0, 1.0, 3.0);
  EXPECT_EQ(l.window.measure(), 3.0);
}

TEST(Classical, ZeroRateHasNoInterval) {
  const auto l = build_classical_layout(gen({{0, 1, 0}, {1, 0, 1}, {0, 2, 0}}));
  ASSERT_EQ(l.entry(0).intervals.size(), 1u);
  EXPECT_EQ(l.entry(0).intervals[0].target, 1u);
  EXPECT_EQ(l.window.measure(), 5.0);
}

TEST(Comparison, ExampleRowTwo) {
  const auto e = example_row(1, 1.5);
  expect_interval(e, 0, 0.0, 2.0);
  expect_interval(e, 2, -2.0, 0.0);
}

TEST(Comparison, ExampleRowThreeAscendingPacking) {
  const auto e = example_row(2, -1.0);
  expect_interval(e, 0, 0.0, 3.0);
  expect_interval(e, 1, 3.0, 5.0);
}

TEST(Comparison, UpwardFarthestNearestZero) {
  const auto e = build_comparison_entry(gen({{0, 1, 2, 4}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}}), 0);
  expect_interval(e, 3, -4.0, 0.0);
  expect_interval(e, 2, -6.0, -4.0);
  expect_interval(e, 1, -7.0, -6.0);
}

TEST(Comparison, ZeroRowAndBandwidthError) {
  const std::vector<double> zeros(3, 0.0);
  EXPECT_TRUE(build_comparison_entry(1, 0, zeros, 1).intervals.empty());
  const std::vector<double> far{0.0, 0.0, 1.0};
  EXPECT_THROW(build_comparison_entry(0, 0, far, 1), InputError);
}

TEST(Block, LeftEndpointsFromGeometry) {
  // 1-based rates q_13 = 2, q_32 = 1, q_24 = 3 with c0 = 2, K0 = 5.
  const RateMatrix q = gen({{0, 1, 2, 0}, {1, 0, 1, 3}, {4, 1, 0, 1}, {0, 2, 1, 0}});
  const auto l = build_block_layout(q, 2, 5.0);
  expect_interval(l.entry(0), 2, 5.0, 7.0);
  expect_interval(l.entry(2), 1, 35.0, 36.0);
  expect_interval(l.entry(1), 3, 25.0, 28.0);
  const BlockGeometry g{2, 5.0};
  EXPECT_EQ(g.block(0).lo, 0.0);
  EXPECT_EQ(g.block(0).hi, 10.0);
  EXPECT_EQ(g.block(1).lo, 10.0);
  EXPECT_EQ(g.block(1).hi, 30.0);
  EXPECT_EQ(g.block(2).lo, 30.0);
  EXPECT_EQ(g.block(2).hi, 50.0);
  for (State s = 0; s < 4; ++s) {
    for (const auto& iv : l.entry(s).intervals) {
      EXPECT_GE(iv.lo, g.block(s).lo);
      EXPECT_LE(iv.hi(), g.block(s).hi);
    }
  }
}

TEST(Block, RejectsRateAboveBoundOrBandAboveC0) {
  EXPECT_THROW(build_block_layout(two_state(6, 1), 1, 5.0), InputError);
  EXPECT_THROW(build_block_layout(gen({{0, 0, 1}, {0, 0, 0}, {0, 0, 0}}), 1, 5.0), InputError);
}

TEST(Block, SharedGeometryGivesCommonLeftEndpoints) {
  for (std::size_t k = 0; k < kSuiteSize; ++k) {
    const auto p = random_pair(k);
    const auto a = build_block_layout(p.q, p.c0, p.k0);
    const auto b = build_block_layout(p.qt, p.c0, p.k0);
    for (State s = 0; s < p.q.size(); ++s) {
      for (State t = 0; t < p.q.size(); ++t) {
        if (s == t) continue;
        const double r = p.q.rate(s, t), rt = p.qt.rate(s, t);
        const double lo = a.blocks->left_endpoint(s, t);
        // [lo, lo + r) and [lo, lo + rt): intersection min(r, rt), symmetric difference |r - rt|.
        const double inter = std::max(0.0, std::min(lo + r, lo + rt) - lo);
        EXPECT_NEAR(inter, std::min(r, rt), 1e-12);
        EXPECT_NEAR((r + rt) - 2 * inter, std::abs(r - rt), 1e-12);
        for (const auto* l : {&a, &b}) {
          for (const auto& iv : l->entry(s).intervals) {
            if (iv.target == t) EXPECT_EQ(iv.lo, lo);
          }
        }
      }
    }
  }
}

TEST(MarkToJump, MembershipThinningAndHalfOpen) {
  const auto e = example_row(1, 1.5);
  EXPECT_EQ(mark_to_jump(e, 1.0), std::optional<State>(0));
  EXPECT_EQ(mark_to_jump(e, -0.5), std::optional<State>(2));
  EXPECT_EQ(mark_to_jump(e, 4.9), std::nullopt);
  EXPECT_EQ(mark_to_jump(e, 2.0), std::nullopt);
  EXPECT_EQ(mark_to_jump(e, 0.0), std::optional<State>(0));
  EXPECT_EQ(mark_to_jump(e, -2.0), std::optional<State>(2));
  EXPECT_EQ(mark_to_jump(e, std::nextafter(-2.0, -3.0)), std::nullopt);
  EXPECT_EQ(mark_to_jump(LayoutEntry{}, 0.0), std::nullopt);
}

TEST(MarkWindow, ExampleEnvelopesNeedFive) {
  const auto env = envelope_matrices(distance_saturation_family(3));
  const auto star = build_comparison_layout(env.q_star), bar = build_comparison_layout(env.q_bar);
  const MarkWindow w = required_mark_window({&star, &bar});
  ASSERT_EQ(w.segments.size(), 1u);
  EXPECT_EQ(w.segments[0].lo, -5.0);
  EXPECT_EQ(w.segments[0].hi, 5.0);
}

TEST(MarkWindow, UpperEnvelopeCanNeedTwiceK0) {
  const double k0 = 1.5;
  StateDependentRateSpec spec;
  spec.n_states = 4;
  spec.bandwidth = 2;
  spec.k0 = k0;
  spec.rate = [k0](State i, State j, StatePoint) { return (i == 0 && j == 2) || (i == 1 && j == 3) ? k0 : 0.0; };
  spec.envelope = [k0](State i, State j) {
    const double v = (i == 0 && j == 2) || (i == 1 && j == 3) ? k0 : 0.0;
    return RateRange{v, v};
  };
  EXPECT_TRUE(validate(spec).empty());
  const auto env = envelope_matrices(spec);
  const auto star = build_comparison_layout(env.q_star), bar = build_comparison_layout(env.q_bar);
  expect_interval(bar.entry(1), 2, -2 * k0, -k0);
  expect_interval(bar.entry(1), 3, -k0, 0.0);
  const MarkWindow w = required_mark_window({&star, &bar}, spec.k0);
  EXPECT_EQ(w.segments[0].hi, 2 * k0);
}

TEST(MarkWindow, SingleGeneratorHalfSums) {
  const RateMatrix q = gen({{0, 1, 2}, {3, 0, 1}, {1, 1, 0}});
  const auto l = build_comparison_layout(q);
  const MarkWindow w = required_mark_window({&l});
  // Largest one-sided sum is 3 (row 1 upward, row 2 downward).
  EXPECT_EQ(w.segments[0].hi, 3.0);
  EXPECT_LE(w.segments[0].hi, q.max_exit_rate());
  for (State i = 0; i < 3; ++i) {
    for (const auto& iv : l.entry(i).intervals) EXPECT_TRUE(w.covers(iv.lo, iv.hi()));
  }
}

TEST(MarkWindow, BlockUnion) {
  const auto a = build_block_layout(two_state(1, 1), 1, 1.0);
  const MarkWindow w = required_mark_window({&a});
  ASSERT_EQ(w.segments.size(), 1u);
  EXPECT_EQ(w.segments[0].lo, 0.0);
  EXPECT_EQ(w.segments[0].hi, 3.0);
}

TEST(Properties, LengthsEqualRatesExactly) {
  for (std::size_t k = 0; k < kSuiteSize; ++k) {
    const auto p = random_pair(k);
    for (const auto& l : {build_classical_layout(p.q), build_comparison_layout(p.q), build_block_layout(p.q, p.c0, p.k0)}) {
      for (State i = 0; i < p.q.size(); ++i) {
        std::vector<double> by_target(p.q.size(), 0.0);
        for (const auto& iv : l.entry(i).intervals) {
          EXPECT_EQ(iv.length, p.q.rate(i, iv.target));
          by_target[iv.target] = iv.length;
        }
        double s = 0.0;
        for (State j = 0; j < p.q.size(); ++j) s += by_target[j];
        EXPECT_EQ(s, p.q.exit_rate(i));
        const auto& ivs = l.entry(i).intervals;
        // Endpoints come from running sums, so neighbours may overlap by rounding.
        for (std::size_t m = 1; m < ivs.size(); ++m) EXPECT_LE(ivs[m - 1].hi(), ivs[m].lo + 1e-12);
        for (const auto& iv : ivs) {
          if (iv.length > 1e-11) EXPECT_TRUE(l.window.covers(iv.lo + 1e-12, iv.hi() - 1e-12));
        }
      }
    }
  }
}

TEST(Properties, ComparisonInclusionRelations) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const std::size_t n = 3 + seed % 4, band = 1 + seed % 2;
    const auto spec = random_spec(seed, n, band);
    const auto env = envelope_matrices(spec);
    const auto bar = build_comparison_layout(env.q_bar), star = build_comparison_layout(env.q_star);
    for (double x : {-2.0, -0.3, 0.0, 0.8, 1.6}) {
      for (State i = 0; i < n; ++i) {
        const LayoutEntry li = row_at(spec, i, x);
        for (State k = 0; k < n; ++k) {
          for (State m = 0; m < n; ++m) {
            auto up = [m](State r) { return r >= m; };
            auto down = [m](State r) { return r <= m; };
            if (i <= k && m > k) EXPECT_TRUE(contains(span_of(bar.entry(k), up), span_of(li, up)));
            if (i <= k && m < i) EXPECT_TRUE(contains(span_of(li, down), span_of(bar.entry(k), down)));
            if (k <= i && m > i) EXPECT_TRUE(contains(span_of(li, up), span_of(star.entry(k), up)));
            if (k <= i && m < k) EXPECT_TRUE(contains(span_of(star.entry(k), down), span_of(li, down)));
          }
        }
      }
    }
  }
}

TEST(Properties, UniformMarksGiveRatesOverMeasure) {
  const RateMatrix q = gen({{0, 1, 0.5}, {2, 0, 1}, {0.25, 1.5, 0}});
  const std::size_t draws = 100000;
  for (const auto& l : {build_classical_layout(q), build_comparison_layout(q), build_block_layout(q, 2, 2.0)}) {
    CounterRng rng(test_stream(5));
    std::vector<std::vector<double>> hits(3, std::vector<double>(3, 0.0));
    for (std::size_t d = 0; d < draws; ++d) {
      const double z = l.window.sample(rng.uniform_open());
      for (State i = 0; i < 3; ++i) {
        if (auto j = mark_to_jump(l.entry(i), z)) hits[i][*j] += 1.0;
      }
    }
    const double m = l.window.measure();
    for (State i = 0; i < 3; ++i) {
      for (State j = 0; j < 3; ++j) {
        if (i == j) continue;
        const double p = q.rate(i, j) / m;
        EXPECT_LE(std::abs(hits[i][j] / draws - p), 3.0 * std::sqrt(p * (1 - p) / draws) + 1e-12)
            << to_string(l.kind) << " " << i << "->" << j;
      }
    }
  }
}

TEST(Dump, GoldenLines) {
  std::ostringstream s;
  dump_layout(s, build_classical_layout(gen({{-1, 1}, {2, -2}})));
  EXPECT_EQ(s.str(), "1 2 0.000000000000 1.000000000000 classical\n2 1 1.000000000000 3.000000000000 classical\n");
  std::ostringstream c;
  dump_layout(c, build_comparison_layout(gen({{-1, 1}, {2, -2}})));
  EXPECT_EQ(c.str(), "1 2 -1.000000000000 0.000000000000 comparison\n2 1 0.000000000000 2.000000000000 comparison\n");
}
