#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"

using namespace sbtest;

namespace {

std::vector<ChainPath> chain_ensemble(const IntervalLayout& layout, std::size_t reps, double t, std::uint64_t scenario) {
  std::vector<ChainPath> out;
  out.reserve(reps);
  const State n = layout.entries.size();
  for (std::size_t r = 0; r < reps; ++r) out.push_back(simulate_chain(layout, r % n, t, test_stream(scenario).with_replica(r)));
  return out;
}

StateDependentRateSpec constant_spec(const RateMatrix& q) {
  StateDependentRateSpec spec;
  spec.n_states = q.size();
  spec.bandwidth = q.bandwidth();
  spec.k0 = q.max_exit_rate();
  spec.rate = [q](State i, State j, StatePoint) { return q.rate(i, j); };
  spec.envelope = [q](State i, State j) { return RateRange{q.rate(i, j), q.rate(i, j)}; };
  return spec;
}

bool same_path(const ChainPath& a, const ChainPath& b) {
  if (a.initial != b.initial || a.jumps.size() != b.jumps.size()) return false;
  for (std::size_t k = 0; k < a.jumps.size(); ++k) {
    if (a.jumps[k].time != b.jumps[k].time || a.jumps[k].state != b.jumps[k].state) return false;
  }
  return true;
}

const RateMatrix kThree = gen({{0, 1, 0.5}, {2, 0, 1}, {0.25, 1.5, 0}});

}  // namespace

TEST(ChainPath, RightContinuous) {
  const ChainPath p{0, {{1.0, 2}, {2.0, 1}}, 3.0};
  EXPECT_EQ(p.state_at(0.0), 0u);
  EXPECT_EQ(p.state_at(std::nextafter(1.0, 0.0)), 0u);
  EXPECT_EQ(p.state_at(1.0), 2u);
  EXPECT_EQ(p.state_at(2.5), 1u);
  EXPECT_EQ(p.final_state(), 1u);
}

TEST(Chain, ZeroGeneratorIsConstant) {
  const RateMatrix zero = gen({{0, 0}, {0, 0}});
  for (LayoutKind kind : {LayoutKind::classical, LayoutKind::comparison_signed, LayoutKind::block}) {
    const auto p = simulate_chain(zero, kind, 1, 100.0, test_stream(1));
    EXPECT_TRUE(p.jumps.empty());
    EXPECT_EQ(p.final_state(), 1u);
  }
}

TEST(Chain, JumpTimesComeFromTheStream) {
  const IntervalLayout l = build_comparison_layout(kThree);
  const StreamSpec s = test_stream(2);
  const ChainPath p = simulate_chain(l, 0, 20.0, s);
  const EventStream e = global_clock(l.window, 20.0, s.with_block(kGlobalClockBlock));
  std::size_t k = 0;
  for (const auto& j : p.jumps) {
    while (k < e.events.size() && e.events[k].time < j.time) ++k;
    ASSERT_LT(k, e.events.size());
    EXPECT_EQ(e.events[k].time, j.time);
    EXPECT_LT(j.state, 3u);
  }
  EXPECT_TRUE(same_path(p, simulate_chain(l, 0, 20.0, s)));
}

TEST(Chain, TwoStateTransitionProbability) {
  const RateMatrix q = two_state(1, 1);
  const std::size_t reps = 100000;
  const double p = (1 - std::exp(-2.0)) / 2;
  for (LayoutKind kind : {LayoutKind::classical, LayoutKind::comparison_signed, LayoutKind::block}) {
    const IntervalLayout l = build_layout(q, kind);
    double hits = 0;
    for (std::size_t r = 0; r < reps; ++r) hits += simulate_chain(l, 0, 1.0, test_stream(3).with_replica(r)).final_state() == 1;
    EXPECT_LE(std::abs(hits / reps - p), 3.0 * std::sqrt(p * (1 - p) / reps)) << to_string(kind);
  }
}

TEST(Chain, MarginalsMatchSemigroup) {
  const std::size_t reps = 60000;
  for (LayoutKind kind : {LayoutKind::classical, LayoutKind::comparison_signed, LayoutKind::block}) {
    const IntervalLayout l = build_layout(kThree, kind);
    for (double t : {0.5, 1.0, 2.0}) {
      const auto paths = chain_ensemble(l, reps, t, 4);
      const DenseMatrix p = transition_semigroup(kThree, t);
      std::vector<std::vector<double>> counts(3, std::vector<double>(3, 0.0));
      for (const auto& path : paths) counts[path.initial][path.final_state()] += 1.0;
      for (State i = 0; i < 3; ++i) {
        const double n = reps / 3.0;
        for (State j = 0; j < 3; ++j) {
          EXPECT_LE(std::abs(counts[i][j] / n - p(i, j)), 3.0 * std::sqrt(p(i, j) * (1 - p(i, j)) / n))
              << to_string(kind) << " t=" << t << " " << i << "->" << j;
        }
      }
    }
  }
}

TEST(Chain, LayoutsAgreeInLawButNotPathwise) {
  const std::size_t reps = 100000;
  IntervalLayout classical = build_classical_layout(kThree), signed_layout = build_comparison_layout(kThree);
  // One shared window so both chains read the very same marks.
  const double hi = std::max(classical.window.segments[0].hi, signed_layout.window.segments[0].hi);
  const MarkWindow common = MarkWindow::span(signed_layout.window.segments[0].lo, hi);
  classical.window = common;
  signed_layout.window = common;
  const auto a = chain_ensemble(classical, reps, 1.0, 5);
  const auto b = chain_ensemble(signed_layout, reps, 1.0, 5);
  const auto ca = empirical_transition_check(a, kThree, 1.0), cb = empirical_transition_check(b, kThree, 1.0);
  EXPECT_TRUE(ca.pass) << ca.max_tv();
  EXPECT_TRUE(cb.pass) << cb.max_tv();
  std::size_t differ = 0;
  for (std::size_t r = 0; r < reps; ++r) differ += a[r].final_state() != b[r].final_state();
  EXPECT_GT(differ, reps / 10);
}

TEST(EulerMaruyama, DeterministicLinearOde) {
  DiffusionSpec s = linear_regime_diffusion({-0.7}, {0.0});
  GaussianNoise noise(test_stream(6));
  const double x0[1] = {2.0};
  for (double dt : {0.1, 0.01, 0.001}) {
    const auto seg = euler_maruyama_segment(s, 0, x0, 0.0, 1.0, dt, noise);
    const double steps = std::round(1.0 / dt);
    EXPECT_NEAR(seg.path.values.back(), 2.0 * std::pow(1 - 0.7 * dt, steps), 1e-12);
    EXPECT_EQ(seg.path.times.back(), 1.0);
    EXPECT_EQ(seg.path.times.size(), static_cast<std::size_t>(steps) + 1);
  }
  const auto fine = euler_maruyama_segment(s, 0, x0, 0.0, 1.0, 1e-5, noise);
  EXPECT_NEAR(fine.path.values.back(), 2.0 * std::exp(-0.7), 1e-4);
}

TEST(EulerMaruyama, UnalignedEndpointsAndErrors) {
  DiffusionSpec s = linear_regime_diffusion({1.0}, {0.0});
  GaussianNoise noise(test_stream(6));
  const double x0[1] = {1.0};
  const auto seg = euler_maruyama_segment(s, 0, x0, 0.013, 0.0551, 0.01, noise);
  const std::vector<double> expect{0.013, 0.02, 0.03, 0.04, 0.05, 0.0551};
  ASSERT_EQ(seg.path.times.size(), expect.size());
  for (std::size_t k = 0; k < expect.size(); ++k) EXPECT_NEAR(seg.path.times[k], expect[k], 1e-15);
  EXPECT_THROW(euler_maruyama_segment(s, 0, x0, 1.0, 1.0, 0.01, noise), InputError);
  const auto blow = euler_maruyama_segment(linear_regime_diffusion({1e6}, {0.0}), 0, x0, 0.0, 1.0, 0.01, noise);
  EXPECT_TRUE(blow.diverged);
}

TEST(EulerMaruyama, GeometricBrownianSecondMoment) {
  const double b = 0.1, sigma = 0.3, t = 1.0;
  const DiffusionSpec s = linear_regime_diffusion({b}, {sigma});
  const std::size_t reps = 100000;
  double sum = 0, sum2 = 0;
  const double x0[1] = {1.0};
  for (std::size_t r = 0; r < reps; ++r) {
    GaussianNoise noise(test_stream(7).with_replica(r));
    const double v = euler_maruyama_segment(s, 0, x0, 0.0, t, 1e-3, noise).path.values.back();
    sum += v * v;
    sum2 += v * v * v * v;
  }
  const double m = sum / reps, se = std::sqrt((sum2 / reps - m * m) / reps);
  EXPECT_LE(std::abs(m - std::exp((2 * b + sigma * sigma) * t)), 3.0 * se);
}

TEST(EulerMaruyama, StrongOrderOneHalf) {
  const double b = 0.5, sigma = 0.8;
  const DiffusionSpec s = linear_regime_diffusion({b}, {sigma});
  const double x0[1] = {1.0};
  const std::size_t reps = 2000;
  std::vector<double> log_dt, log_err;
  for (int e = 3; e <= 8; ++e) {
    const double dt = std::ldexp(1.0, -e);
    double err = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const StreamSpec spec = test_stream(8).with_replica(r);
      GaussianNoise noise(spec), replay(spec);
      const double em = euler_maruyama_segment(s, 0, x0, 0.0, 1.0, dt, noise).path.values.back();
      // The same normals rebuild the Brownian endpoint for the exact solution.
      double w = 0.0;
      for (int k = 0; k < (1 << e); ++k) w += std::sqrt(dt) * replay.next();
      err += std::abs(em - std::exp((b - sigma * sigma / 2) + sigma * w)) / reps;
    }
    log_dt.push_back(std::log(dt));
    log_err.push_back(std::log(err));
  }
  const double mx = std::accumulate(log_dt.begin(), log_dt.end(), 0.0) / log_dt.size();
  const double my = std::accumulate(log_err.begin(), log_err.end(), 0.0) / log_err.size();
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < log_dt.size(); ++k) {
    sxy += (log_dt[k] - mx) * (log_err[k] - my);
    sxx += (log_dt[k] - mx) * (log_dt[k] - mx);
  }
  EXPECT_NEAR(sxy / sxx, 0.5, 0.2);
  for (std::size_t k = 1; k < log_err.size(); ++k) EXPECT_LT(log_err[k], log_err[k - 1]);
}

TEST(Bundle, ExampleOrderHolds) {
  const auto spec = distance_saturation_family(3);
  const auto env = envelope_matrices(spec);
  const auto dspec = linear_regime_diffusion({1, 0, -1}, {1, 1, 1});
  const ComparisonSetup setup = prepare_comparison(spec, env, dspec);
  EXPECT_EQ(setup.k_mark, 5.0);
  const double x0[1] = {1.0};
  std::vector<ComparisonBundle> bundles;
  for (std::size_t r = 0; r < 300; ++r) {
    bundles.push_back(simulate_comparison_bundle(setup, x0, 1, 10.0, 1e-3, test_stream(9).with_replica(r), {Recording::none, {}}));
  }
  const auto rep = order_violations(bundles);
  EXPECT_EQ(rep.count, 0u);
  EXPECT_GT(rep.checked_epochs, 300u);
}

TEST(Bundle, DeterministicAndEpochsOnGrid) {
  const auto spec = distance_saturation_family(3);
  const auto env = envelope_matrices(spec);
  const auto dspec = linear_regime_diffusion({1, 0, -1}, {1, 1, 1});
  const double x0[1] = {0.5};
  const BundleOptions full{Recording::full, {}};
  const auto a = simulate_comparison_bundle(spec, env, dspec, x0, 0, 3.0, 0.01, test_stream(10), full);
  const auto b = simulate_comparison_bundle(spec, env, dspec, x0, 0, 3.0, 0.01, test_stream(10), full);
  EXPECT_TRUE(same_path(a.lambda, b.lambda) && same_path(a.star, b.star) && same_path(a.bar, b.bar));
  EXPECT_EQ(a.diffusion.values, b.diffusion.values);
  for (std::size_t k = 1; k < a.diffusion.times.size(); ++k) EXPECT_GT(a.diffusion.times[k], a.diffusion.times[k - 1]);
  for (const auto& j : a.lambda.jumps) {
    EXPECT_TRUE(std::binary_search(a.diffusion.times.begin(), a.diffusion.times.end(), j.time)) << j.time;
  }
  std::ostringstream dump;
  dump_bundle(dump, a);
  std::string first;
  std::getline(std::istringstream(dump.str()) >> std::ws, first);
  EXPECT_EQ(first, "0.000000000 1 1 1 0.500000000");
}

TEST(Bundle, StateIndependentRatesKeepOrder) {
  // Row 3 jumps to 1 faster than row 2 does, so q̄ and q* both differ from q.
  const RateMatrix q = gen({{0, 1, 0.5}, {0.25, 0, 1}, {2, 1.5, 0}});
  const auto spec = constant_spec(q);
  const auto env = envelope_matrices(spec);
  EXPECT_FALSE(env.q_bar == q);
  EXPECT_FALSE(env.q_star == q);
  const auto dspec = linear_regime_diffusion({0, 0, 0}, {0, 0, 0});
  const double x0[1] = {0.0};
  std::vector<ComparisonBundle> bundles;
  std::size_t differ = 0;
  for (std::size_t r = 0; r < 200; ++r) {
    bundles.push_back(simulate_comparison_bundle(spec, env, dspec, x0, r % 3, 5.0, 0.1, test_stream(11).with_replica(r)));
    differ += !same_path(bundles.back().lambda, bundles.back().bar);
  }
  EXPECT_EQ(order_violations(bundles).count, 0u);
  EXPECT_GT(differ, 0u);
}

TEST(Bundle, ConstantBirthDeathPathsCoincide) {
  const RateMatrix q = gen({{0, 1, 0, 0}, {2, 0, 0.5, 0}, {0, 3, 0, 1}, {0, 0, 2, 0}});
  const auto spec = constant_spec(q);
  const auto env = envelope_matrices(spec);
  const auto dspec = linear_regime_diffusion({0, 0, 0, 0}, {1, 1, 1, 1});
  const double x0[1] = {1.0};
  for (std::size_t r = 0; r < 100; ++r) {
    const auto b = simulate_comparison_bundle(spec, env, dspec, x0, 1, 5.0, 0.05, test_stream(12).with_replica(r));
    EXPECT_TRUE(same_path(b.lambda, b.star) && same_path(b.lambda, b.bar));
  }
}

TEST(Bundle, CountableStatesWithinWindow) {
  StateDependentRateSpec spec;
  spec.bandwidth = 1;
  spec.k0 = 3.5;
  spec.rate = [](State i, State j, StatePoint x) {
    const double s = std::min(x[0] * x[0], 1.0);
    if (i > j + 1 || j > i + 1) return 0.0;
    return j > i ? 1.0 + 0.5 * s : (i > 0 ? 1.5 + 0.5 * s : 0.0);
  };
  spec.envelope = [](State i, State j) { return j > i ? RateRange{1.0, 1.5} : RateRange{i > 0 ? 1.5 : 0.0, i > 0 ? 2.0 : 0.0}; };
  EXPECT_TRUE(validate(spec).empty());
  const auto env = envelope_matrices(spec, 40);
  const auto dspec = linear_regime_diffusion(std::vector<double>(40, -0.5), std::vector<double>(40, 0.5));
  const double x0[1] = {1.0};
  std::vector<ComparisonBundle> bundles;
  for (std::size_t r = 0; r < 100; ++r) bundles.push_back(simulate_comparison_bundle(spec, env, dspec, x0, 0, 2.0, 0.01, test_stream(13).with_replica(r)));
  EXPECT_EQ(order_violations(bundles).count, 0u);
  EXPECT_THROW(simulate_comparison_bundle(spec, envelope_matrices(spec, 3), dspec, x0, 1, 50.0, 0.1, test_stream(13)), InputError);
}

TEST(Bundle, WindowOverflowIsInternalError) {
  const auto spec = distance_saturation_family(3);
  const auto dspec = linear_regime_diffusion({0, 0, 0}, {0, 0, 0});
  ComparisonSetup setup = prepare_comparison(spec, envelope_matrices(spec), dspec);
  setup.k_mark = 0.5;
  const double x0[1] = {1.0};
  EXPECT_THROW(simulate_comparison_bundle(setup, x0, 1, 10.0, 0.1, test_stream(14)), InternalError);
}

TEST(Bundle, DivergenceIsFlagged) {
  const auto spec = distance_saturation_family(3);
  const auto dspec = linear_regime_diffusion({1e4, 1e4, 1e4}, {0, 0, 0});
  const double x0[1] = {1.0};
  const auto b = simulate_comparison_bundle(spec, envelope_matrices(spec), dspec, x0, 1, 10.0, 0.01, test_stream(15));
  EXPECT_TRUE(b.diverged);
  EXPECT_LT(b.diverged_at, 10.0);
}

TEST(Pair, IdenticalGeneratorsNeverSplit) {
  for (std::size_t k = 0; k < 5; ++k) {
    const auto p = random_pair(k);
    for (std::size_t r = 0; r < 50; ++r) {
      const auto pp = simulate_perturbation_pair(p.q, p.q, p.c0, p.k0, p.i0, 10.0, test_stream(16).with_replica(r));
      EXPECT_TRUE(same_path(pp.first, pp.second));
    }
  }
}

TEST(Pair, TwoStateThetaMatchesOracle) {
  const RateMatrix q = two_state(1, 1), qt = two_state(2, 2);
  std::vector<PerturbationPair> pairs;
  for (std::size_t r = 0; r < 10000; ++r) pairs.push_back(simulate_perturbation_pair(q, qt, 1, 2.0, 0, 1.0, test_stream(17).with_replica(r)));
  const auto est = estimate_theta(pairs, 1.0);
  EXPECT_TRUE(est.covers(exact_theta(q, qt, 0, 1.0))) << est.estimate << " +- " << est.se;
}

TEST(Pair, JointLawIsTheCouplingGenerator) {
  struct Case {
    RateMatrix q, qt;
    std::size_t c0;
    double k0;
  };
  const std::vector<Case> cases{{two_state(1, 1), two_state(2, 2), 1, 2.0},
                                {gen({{0, 1, 0.5}, {2, 0, 1}, {0.25, 1.5, 0}}), gen({{0, 0.5, 1}, {1, 0, 1.5}, {1, 1, 0}}), 2, 2.0}};
  const double h = 0.5;
  const std::size_t reps = 30000;
  for (const auto& c : cases) {
    const std::size_t n = c.q.size();
    const DenseMatrix law = transition_semigroup(coupling_generator(c.q, c.qt), h);
    for (State i0 = 0; i0 < n; ++i0) {
      std::vector<double> counts(n * n, 0.0);
      for (std::size_t r = 0; r < reps; ++r) {
        const auto pp = simulate_perturbation_pair(c.q, c.qt, c.c0, c.k0, i0, h, test_stream(18 + n).with_replica(r));
        counts[pair_index(n, pp.first.final_state(), pp.second.final_state())] += 1.0;
      }
      for (std::size_t s = 0; s < n * n; ++s) {
        const double p = law(pair_index(n, i0, i0), s);
        EXPECT_LE(std::abs(counts[s] / reps - p), 3.0 * std::sqrt(p * (1 - p) / reps) + 1e-12) << n << " " << i0 << " " << s;
      }
    }
  }
}

TEST(Pair, SeparationOnlyThroughSymmetricDifference) {
  for (std::size_t k = 0; k < kSuiteSize; ++k) {
    const auto p = random_pair(k);
    const auto a = build_block_layout(p.q, p.c0, p.k0), b = build_block_layout(p.qt, p.c0, p.k0);
    for (std::size_t r = 0; r < 20; ++r) {
      const auto pp = simulate_perturbation_pair(a, b, p.i0, 10.0, test_stream(20).with_replica(r), true);
      State x = p.i0, y = p.i0;
      for (const auto& e : pp.consulted) {
        const State nx = mark_to_jump(a.entry(x), e.mark).value_or(x);
        const State ny = mark_to_jump(b.entry(y), e.mark).value_or(y);
        if (x == y && nx != ny) {
          bool in_diff = false;
          for (State j = 0; j < p.q.size(); ++j) {
            if (j == x) continue;
            const double lo = a.blocks->left_endpoint(x, j);
            const double r1 = p.q.rate(x, j), r2 = p.qt.rate(x, j);
            in_diff = in_diff || (e.mark >= lo + std::min(r1, r2) && e.mark < lo + std::max(r1, r2));
          }
          EXPECT_TRUE(in_diff) << k << " " << e.time;
        }
        x = nx;
        y = ny;
      }
      EXPECT_EQ(x, pp.first.final_state());
      EXPECT_EQ(y, pp.second.final_state());
    }
  }
}

TEST(Pair, RejectsBrokenHypotheses) {
  EXPECT_THROW(simulate_perturbation_pair(two_state(3, 1), two_state(1, 1), 1, 2.0, 0, 1.0, test_stream(21)), InputError);
  const auto a = build_block_layout(two_state(1, 1), 1, 2.0), b = build_block_layout(two_state(1, 1), 1, 3.0);
  EXPECT_THROW(simulate_perturbation_pair(a, b, 0, 1.0, test_stream(21)), InputError);
}
