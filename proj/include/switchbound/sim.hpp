#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "switchbound/clocks.hpp"
#include "switchbound/common.hpp"
#include "switchbound/layout.hpp"
#include "switchbound/rate_matrix.hpp"
#include "switchbound/state_dependent.hpp"

namespace switchbound {

struct Jump {
  double time = 0.0;
  State state = 0;
};

/// Right-continuous piecewise-constant path: the state after a jump at time
/// s is already in effect at s.
struct ChainPath {
  State initial = 0;
  std::vector<Jump> jumps;
  double horizon = 0.0;

  State state_at(double t) const {
    auto it = std::upper_bound(jumps.begin(), jumps.end(), t, [](double v, const Jump& j) { return v < j.time; });
    return it == jumps.begin() ? initial : std::prev(it)->state;
  }
  State final_state() const { return jumps.empty() ? initial : jumps.back().state; }
};

/// Continuous component of a regime-switching diffusion. `drift` writes b(x, i)
/// into a length-d buffer, `volatility` writes σ(x, i) row-major as d x d.
struct DiffusionSpec {
  using Field = std::function<void(StatePoint, State, std::span<double>)>;

  struct Lyapunov {
    std::function<double(StatePoint)> rho;
    std::vector<double> beta;
    double p = 0.0;
    double c_tilde = 0.0;
  };

  std::size_t dim = 1;
  Field drift;
  Field volatility;
  std::string drift_id = "custom";
  std::string volatility_id = "custom";
  std::optional<Lyapunov> lyapunov;
};

/// dX = b_i X dt + σ_i X dB in one dimension (geometric Brownian motion per
/// regime). With ρ(x) = x², L^(i)ρ = (2 b_i + σ_i²) ρ exactly, which fills the
/// Lyapunov data.
inline DiffusionSpec linear_regime_diffusion(std::vector<double> b, std::vector<double> sigma) {
  require(!b.empty() && b.size() == sigma.size(), "linear diffusion: drift and volatility need one entry per regime");
  DiffusionSpec spec;
  spec.dim = 1;
  spec.drift = [b](StatePoint x, State i, std::span<double> out) { out[0] = b.at(i) * x[0]; };
  spec.volatility = [sigma](StatePoint x, State i, std::span<double> out) { out[0] = sigma.at(i) * x[0]; };
  spec.drift_id = "linear";
  spec.volatility_id = "linear";
  DiffusionSpec::Lyapunov ly;
  ly.rho = [](StatePoint x) { return x[0] * x[0]; };
  for (std::size_t i = 0; i < b.size(); ++i) ly.beta.push_back(2.0 * b[i] + sigma[i] * sigma[i]);
  ly.p = 2.0;
  ly.c_tilde = 1.0;
  spec.lyapunov = ly;
  return spec;
}

/// Standard normals from a counter stream; independent of every clock stream
/// because it lives on the reserved noise block.
class GaussianNoise {
 public:
  explicit GaussianNoise(const StreamSpec& spec) : rng_(spec.with_block(kNoiseBlock)) {}
  double next() { return normal_(rng_); }

 private:
  CounterRng rng_;
  std::normal_distribution<double> normal_;
};

struct DiffusionPath {
  std::size_t dim = 1;
  std::vector<double> times;
  std::vector<double> values;  // dim values per time
  std::string drift_id;
  std::string volatility_id;

  std::span<const double> at(std::size_t k) const { return {values.data() + k * dim, dim}; }
  void push(double t, std::span<const double> x) {
    times.push_back(t);
    values.insert(values.end(), x.begin(), x.end());
  }
};

/// Explicit Euler-Maruyama with state held in a caller-owned buffer. Steps
/// follow the global grid k·dt; t0 and t1 need not be grid points, so jump
/// epochs are inserted rather than snapped.
class EulerMaruyama {
 public:
  EulerMaruyama(const DiffusionSpec& spec, double dt) : spec_(spec), dt_(dt), b_(spec.dim), s_(spec.dim * spec.dim), z_(spec.dim) {
    require(dt > 0.0 && std::isfinite(dt), "euler-maruyama: dt must be positive");
    require(spec.dim >= 1 && spec.drift && spec.volatility, "euler-maruyama: incomplete diffusion spec");
  }

  /// Advances x from t0 to t1 in regime i, calling on_point(t, x) after every
  /// step. Returns false as soon as a component is non-finite.
  template <class OnPoint>
  bool advance(State i, std::vector<double>& x, double t0, double t1, GaussianNoise& noise, OnPoint&& on_point) {
    const std::size_t d = spec_.dim;
    double t = t0;
    while (t < t1) {
      double next = (std::floor(t / dt_) + 1.0) * dt_;
      if (next <= t + 1e-9 * dt_) next += dt_;
      if (next > t1 - 1e-9 * dt_) next = t1;
      const double h = next - t;
      const double sq = std::sqrt(h);
      spec_.drift(x, i, b_);
      spec_.volatility(x, i, s_);
      for (std::size_t k = 0; k < d; ++k) z_[k] = noise.next() * sq;
      for (std::size_t r = 0; r < d; ++r) {
        double v = x[r] + b_[r] * h;
        for (std::size_t k = 0; k < d; ++k) v += s_[r * d + k] * z_[k];
        x[r] = v;
      }
      t = next;
      for (double v : x) {
        if (!std::isfinite(v)) return false;
      }
      on_point(t, std::as_const(x));
    }
    return true;
  }

 private:
  const DiffusionSpec& spec_;
  double dt_;
  std::vector<double> b_, s_, z_;
};

struct DiffusionSegment {
  DiffusionPath path;
  bool diverged = false;
};

/// EM path of the frozen regime i on [t0, t1], starting point included.
inline DiffusionSegment euler_maruyama_segment(const DiffusionSpec& spec, State i, std::span<const double> x0, double t0,
                                               double t1, double dt, GaussianNoise& noise) {
  require(t1 > t0, "euler-maruyama: t1 must exceed t0");
  require(x0.size() == spec.dim, "euler-maruyama: x0 has the wrong dimension");
  DiffusionSegment out;
  out.path.dim = spec.dim;
  out.path.drift_id = spec.drift_id;
  out.path.volatility_id = spec.volatility_id;
  std::vector<double> x(x0.begin(), x0.end());
  out.path.push(t0, x);
  EulerMaruyama em(spec, dt);
  out.diverged = !em.advance(i, x, t0, t1, noise, [&](double t, const std::vector<double>& v) { out.path.push(t, v); });
  return out;
}

namespace detail {

inline ChainPath run_global_clock_chain(const IntervalLayout& layout, State i0, double horizon, const StreamSpec& spec) {
  ChainPath path{i0, {}, horizon};
  const EventStream stream = global_clock(layout.window, horizon, spec.with_block(kGlobalClockBlock));
  State state = i0;
  for (const Event& e : stream.events) {
    if (auto j = mark_to_jump(layout.entry(state), e.mark)) {
      state = *j;
      path.jumps.push_back({e.time, state});
    }
  }
  return path;
}

inline ChainPath run_block_chain(const IntervalLayout& layout, State i0, double horizon, const StreamSpec& spec) {
  ChainPath path{i0, {}, horizon};
  BlockClockEnsemble clocks(*layout.blocks, horizon, spec);
  State state = i0;
  double t = 0.0;
  while (const Event* e = clocks.next_after(state, t)) {
    t = e->time;
    if (auto j = mark_to_jump(layout.entry(state), e->mark)) {
      state = *j;
      path.jumps.push_back({t, state});
    }
  }
  return path;
}

}  // namespace detail

/// Chain driven by the stream matched to the layout: the layout's window for
/// classical and comparison layouts, the per-state blocks for a block layout.
inline ChainPath simulate_chain(const IntervalLayout& layout, State i0, double horizon, const StreamSpec& spec) {
  require(i0 < layout.entries.size(), "simulate_chain: initial state outside S");
  require(horizon > 0.0, "simulate_chain: horizon must be positive");
  if (layout.kind == LayoutKind::block) return detail::run_block_chain(layout, i0, horizon, spec);
  return detail::run_global_clock_chain(layout, i0, horizon, spec);
}

/// Block layout parameters for q alone: c0 = max(bandwidth, 1), K0 = the
/// largest rate (1 for the zero generator).
inline BlockGeometry default_block_geometry(const RateMatrix& q) {
  double k0 = 0.0;
  for (State i = 0; i < q.size(); ++i) {
    for (State j = 0; j < q.size(); ++j) k0 = std::max(k0, q.rate(i, j));
  }
  return {std::max<std::size_t>(q.bandwidth(), 1), k0 > 0.0 ? k0 : 1.0};
}

inline IntervalLayout build_layout(const RateMatrix& q, LayoutKind kind) {
  switch (kind) {
    case LayoutKind::classical: return build_classical_layout(q);
    case LayoutKind::comparison_signed: return build_comparison_layout(q);
    case LayoutKind::block: {
      const BlockGeometry g = default_block_geometry(q);
      return build_block_layout(q, g.c0, g.k0);
    }
  }
  throw InputError("unknown layout kind");
}

inline ChainPath simulate_chain(const RateMatrix& q, LayoutKind kind, State i0, double horizon, const StreamSpec& spec) {
  return simulate_chain(build_layout(q, kind), i0, horizon, spec);
}

enum class Recording { none, observations, full };

struct BundleOptions {
  Recording recording = Recording::observations;
  std::vector<double> observe;  // sorted times in [0, horizon]; used by Recording::observations
};

struct ComparisonBundle {
  ChainPath lambda;
  ChainPath star;
  ChainPath bar;
  DiffusionPath diffusion;
  bool diverged = false;
  double diverged_at = kInfinity;
  StreamSpec stream;
  std::size_t events = 0;
};

/// Everything about a bundle that does not depend on the replica.
struct ComparisonSetup {
  const StateDependentRateSpec* spec = nullptr;
  const DiffusionSpec* diffusion = nullptr;
  IntervalLayout star;
  IntervalLayout bar;
  MarkWindow window;
  double k_mark = 0.0;
};

/// Window [-K_mark, K_mark] covering the q* and q̄ layouts and every row of
/// q(x), whose half-sums are at most the exit-rate bound K0.
inline ComparisonSetup prepare_comparison(const StateDependentRateSpec& spec, const EnvelopePair& env, const DiffusionSpec& dspec) {
  require(spec.rate != nullptr, "comparison bundle: spec has no rate oracle");
  require(spec.k0 > 0.0, "comparison bundle: K0 must be positive");
  require(dspec.dim == spec.dim, "comparison bundle: diffusion and rate dimensions differ");
  require(env.q_star.size() == env.q_bar.size(), "comparison bundle: envelope sizes differ");
  if (spec.n_states) require(env.q_bar.size() == *spec.n_states, "comparison bundle: envelope size differs from S");
  ComparisonSetup s;
  s.spec = &spec;
  s.diffusion = &dspec;
  s.star = build_comparison_layout(env.q_star);
  s.bar = build_comparison_layout(env.q_bar);
  s.window = required_mark_window({&s.star, &s.bar}, spec.k0);
  s.k_mark = s.window.segments.front().hi;
  return s;
}

/// Shared-clock bundle (X, Λ, Λ*, Λ̄). At each event of the global clock the
/// Λ layout is rebuilt from q(·,·,X_t) at the Euler-Maruyama value carried to
/// exactly that epoch; Λ* and Λ̄ use the fixed envelope layouts. X follows
/// regime Λ between events.
inline ComparisonBundle simulate_comparison_bundle(const ComparisonSetup& setup, std::span<const double> x0, State i0,
                                                   double horizon, double dt, const StreamSpec& stream,
                                                   const BundleOptions& options = {}) {
  const StateDependentRateSpec& spec = *setup.spec;
  const DiffusionSpec& dspec = *setup.diffusion;
  const std::size_t window_states = setup.bar.entries.size();
  require(x0.size() == spec.dim, "comparison bundle: x0 has the wrong dimension");
  require(i0 < window_states, "comparison bundle: initial state outside S");
  require(horizon > 0.0, "comparison bundle: horizon must be positive");

  ComparisonBundle out;
  out.stream = stream;
  out.lambda = {i0, {}, horizon};
  out.star = {i0, {}, horizon};
  out.bar = {i0, {}, horizon};
  out.diffusion.dim = spec.dim;
  out.diffusion.drift_id = dspec.drift_id;
  out.diffusion.volatility_id = dspec.volatility_id;

  const EventStream clock = global_clock(setup.window, horizon, stream.with_block(kGlobalClockBlock));
  out.events = clock.events.size();
  GaussianNoise noise(stream);
  EulerMaruyama em(dspec, dt);
  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> row;

  std::size_t next_obs = 0;
  const auto& obs = options.observe;
  auto record_full = [&](double t, const std::vector<double>& v) {
    if (options.recording == Recording::full) out.diffusion.push(t, v);
  };
  auto record_observations_at = [&](double t) {
    while (next_obs < obs.size() && obs[next_obs] <= t) {
      if (obs[next_obs] == t) out.diffusion.push(t, x);
      ++next_obs;
    }
  };
  if (options.recording == Recording::full) out.diffusion.push(0.0, x);
  if (options.recording == Recording::observations) record_observations_at(0.0);

  State lam = i0, star = i0, bar = i0;
  double t = 0.0;
  // Advances X to `target`, stopping at every observation time on the way.
  auto integrate_to = [&](double target) {
    while (t < target) {
      double stop = target;
      if (options.recording == Recording::observations && next_obs < obs.size() && obs[next_obs] < target) {
        stop = obs[next_obs];
      }
      if (stop > t && !em.advance(lam, x, t, stop, noise, record_full)) {
        out.diverged = true;
        out.diverged_at = stop;
        return false;
      }
      t = stop;
      if (options.recording == Recording::observations) record_observations_at(t);
    }
    return true;
  };

  auto check_window = [&](State s) {
    if (spec.countable() && s + spec.bandwidth >= window_states) {
      throw InputError("comparison bundle: a chain left the materialized window of " + std::to_string(window_states) +
                       " states");
    }
  };

  for (const Event& e : clock.events) {
    if (!integrate_to(e.time)) return out;
    const auto [lo, hi] = spec.target_range(lam);
    row.assign(hi - lo + 1, 0.0);
    for (State j = lo; j <= hi; ++j) {
      if (j != lam) row[j - lo] = spec.rate(lam, j, x);
    }
    const LayoutEntry entry = build_comparison_entry(lam, lo, row, spec.bandwidth_of(lam));
    if (signed_half_width(entry) > setup.k_mark) {
      throw InternalError("comparison bundle: row of state " + std::to_string(lam + 1) +
                          " overflows the mark window at t=" + std::to_string(e.time));
    }
    if (auto j = mark_to_jump(entry, e.mark)) {
      lam = *j;
      out.lambda.jumps.push_back({e.time, lam});
    }
    if (auto j = mark_to_jump(setup.star.entry(star), e.mark)) {
      star = *j;
      out.star.jumps.push_back({e.time, star});
    }
    if (auto j = mark_to_jump(setup.bar.entry(bar), e.mark)) {
      bar = *j;
      out.bar.jumps.push_back({e.time, bar});
    }
    check_window(bar);
  }
  integrate_to(horizon);
  return out;
}

inline ComparisonBundle simulate_comparison_bundle(const StateDependentRateSpec& spec, const EnvelopePair& env,
                                                   const DiffusionSpec& dspec, std::span<const double> x0, State i0,
                                                   double horizon, double dt, const StreamSpec& stream,
                                                   const BundleOptions& options = {}) {
  const ComparisonSetup setup = prepare_comparison(spec, env, dspec);
  return simulate_comparison_bundle(setup, x0, i0, horizon, dt, stream, options);
}

struct PerturbationPair {
  ChainPath first;   // generator q
  ChainPath second;  // generator q̃
  std::vector<Event> consulted;  // filled when logging is requested
  StreamSpec stream;
};

/// Both chains read one block-clock ensemble. Only the blocks of the current
/// states are consulted; an event in U_k moves whichever chains sit in k,
/// each by its own block layout.
inline PerturbationPair simulate_perturbation_pair(const IntervalLayout& a, const IntervalLayout& b, State i0, double horizon,
                                                   const StreamSpec& stream, bool log_events = false) {
  require(a.kind == LayoutKind::block && b.kind == LayoutKind::block, "perturbation pair: block layouts required");
  require(a.blocks->c0 == b.blocks->c0 && a.blocks->k0 == b.blocks->k0, "perturbation pair: layouts must share (c0, K0)");
  require(a.entries.size() == b.entries.size(), "perturbation pair: dimension mismatch");
  require(i0 < a.entries.size(), "perturbation pair: initial state outside S");
  PerturbationPair out{{i0, {}, horizon}, {i0, {}, horizon}, {}, stream};
  BlockClockEnsemble clocks(*a.blocks, horizon, stream);
  State x = i0, y = i0;
  double t = 0.0;
  while (true) {
    const Event* ex = clocks.next_after(x, t);
    const Event* ey = x == y ? ex : clocks.next_after(y, t);
    const Event* e = ex;
    if (!e || (ey && ey->time < e->time)) e = ey;
    if (!e) break;
    t = e->time;
    if (log_events) out.consulted.push_back(*e);
    const State nx = mark_to_jump(a.entry(x), e->mark).value_or(x);
    const State ny = mark_to_jump(b.entry(y), e->mark).value_or(y);
    if (nx != x) out.first.jumps.push_back({t, nx});
    if (ny != y) out.second.jumps.push_back({t, ny});
    x = nx;
    y = ny;
  }
  return out;
}

inline PerturbationPair simulate_perturbation_pair(const RateMatrix& q, const RateMatrix& qt, std::size_t c0, double k0,
                                                   State i0, double horizon, const StreamSpec& stream,
                                                   bool log_events = false) {
  require(q.size() == qt.size(), "perturbation pair: dimension mismatch");
  return simulate_perturbation_pair(build_block_layout(q, c0, k0), build_block_layout(qt, c0, k0), i0, horizon, stream,
                                    log_events);
}

/// Path dump: "t state_lambda state_star state_bar x..." per recorded time,
/// 1-based states, fixed decimal with 9 digits.
inline void dump_bundle(std::ostream& out, const ComparisonBundle& bundle) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::fixed << std::setprecision(9);
  for (std::size_t k = 0; k < bundle.diffusion.times.size(); ++k) {
    const double t = bundle.diffusion.times[k];
    out << t << ' ' << bundle.lambda.state_at(t) + 1 << ' ' << bundle.star.state_at(t) + 1 << ' '
        << bundle.bar.state_at(t) + 1;
    for (double v : bundle.diffusion.at(k)) out << ' ' << v;
    out << '\n';
  }
  out.flags(flags);
  out.precision(prec);
}

}  // namespace switchbound
