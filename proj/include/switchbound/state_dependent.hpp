#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "switchbound/common.hpp"
#include "switchbound/rate_matrix.hpp"

namespace switchbound {

using StatePoint = std::span<const double>;

struct RateRange {
  double inf = 0.0;
  double sup = 0.0;
};

/// Axis-aligned box sampled on a uniform grid with `resolution` cells per axis
/// (resolution + 1 points per axis, endpoints included).
struct SearchBox {
  std::vector<double> lower;
  std::vector<double> upper;
  std::size_t resolution = 64;
};

/// Switching rates q_ij(x) that depend on the continuous component x in R^d.
///
/// `rate` is only queried off the diagonal; the diagonal is implied, so every
/// q(x) is conservative. `n_states` empty means the countable space {0, 1, ...},
/// in which case `bandwidth` (a global bound on |i - j| for positive rates)
/// is mandatory.
struct StateDependentRateSpec {
  std::optional<std::size_t> n_states;
  std::size_t dim = 1;
  std::function<double(State, State, StatePoint)> rate;
  double k0 = 0.0;
  std::size_t bandwidth = 0;
  std::vector<std::size_t> state_bandwidths;  // optional per-state c_i (finite S)
  std::function<RateRange(State, State)> envelope;  // optional closed-form inf/sup over x
  std::optional<SearchBox> search_box;

  bool countable() const { return !n_states.has_value(); }
  std::size_t bandwidth_of(State i) const {
    return i < state_bandwidths.size() ? state_bandwidths[i] : bandwidth;
  }
  /// Targets j != i with |i - j| <= c_i, clipped to S.
  std::pair<State, State> target_range(State i) const {
    const std::size_t c = bandwidth_of(i);
    const State lo = i >= c ? i - c : 0;
    State hi = i + c;
    if (n_states) hi = std::min(hi, *n_states - 1);
    return {lo, hi};
  }
};

namespace detail {

/// Visits every point of the box grid in lexicographic order.
template <class Fn>
void for_each_grid_point(const SearchBox& box, Fn&& fn) {
  const std::size_t d = box.lower.size();
  const std::size_t r = std::max<std::size_t>(box.resolution, 1);
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> x(d);
  while (true) {
    for (std::size_t k = 0; k < d; ++k) {
      const double w = static_cast<double>(idx[k]) / static_cast<double>(r);
      x[k] = idx[k] == r ? box.upper[k] : box.lower[k] + w * (box.upper[k] - box.lower[k]);
    }
    fn(StatePoint(x));
    std::size_t k = 0;
    while (k < d && ++idx[k] > r) idx[k++] = 0;
    if (k == d) break;
  }
}

inline SearchBox default_box(std::size_t dim) {
  return SearchBox{std::vector<double>(dim, -10.0), std::vector<double>(dim, 10.0), 20};
}

}  // namespace detail

/// Checks (Q1)-style bounds and (Q2)-style bandwidth on a deterministic grid
/// of the declared search box (a default [-10, 10]^d box when none is given).
/// For countable S the first 64 states are checked.
inline ValidationReport validate(const StateDependentRateSpec& spec) {
  ValidationReport report;
  if (!spec.rate) {
    report.push_back({"missing-rate", "rate oracle missing"});
    return report;
  }
  if (spec.dim == 0) report.push_back({"shape", "dimension must be positive"});
  if (spec.countable() && spec.bandwidth == 0) {
    report.push_back({"bandwidth", "countable state space needs a global bandwidth"});
  }
  if (spec.n_states && *spec.n_states == 0) {
    report.push_back({"shape", "state space is empty"});
    return report;
  }
  for (std::size_t i = 0; i < spec.state_bandwidths.size(); ++i) {
    if (spec.state_bandwidths[i] > spec.bandwidth) {
      report.push_back({"bandwidth", "c_" + std::to_string(i + 1) + " exceeds the global bandwidth"});
    }
  }
  const SearchBox box = spec.search_box ? *spec.search_box : detail::default_box(spec.dim);
  const std::size_t states = spec.n_states ? *spec.n_states : 64;
  for (State i = 0; i < states; ++i) {
    const std::size_t c = spec.bandwidth_of(i);
    // Probe one step beyond the declared band on each side for stray rates.
    const State lo = i >= c + 1 ? i - c - 1 : 0;
    State hi = i + c + 1;
    if (spec.n_states) hi = std::min(hi, *spec.n_states - 1);
    bool flagged_bound = false, flagged_band = false, flagged_sign = false;
    detail::for_each_grid_point(box, [&](StatePoint x) {
      double row = 0.0;
      for (State j = lo; j <= hi; ++j) {
        if (j == i) continue;
        const double v = spec.rate(i, j, x);
        const std::size_t d = i > j ? i - j : j - i;
        if ((!std::isfinite(v) || v < 0.0) && !flagged_sign) {
          report.push_back({"negative-rate", "rate (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                                 ") negative or non-finite"});
          flagged_sign = true;
        }
        if (d > c && v != 0.0 && !flagged_band) {
          report.push_back({"bandwidth", "rate (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                             ") beyond bandwidth"});
          flagged_band = true;
        }
        if (d <= c) row += v;
      }
      if (row > spec.k0 * (1.0 + 1e-12) && !flagged_bound) {
        report.push_back({"rate-bound", "row " + std::to_string(i + 1) + " exit rate exceeds K0"});
        flagged_bound = true;
      }
    });
  }
  return report;
}

/// Range of q_ij(x) over x: closed form when the spec provides it, else the
/// grid inf/sup over the search box.
inline RateRange rate_range(const StateDependentRateSpec& spec, State i, State j) {
  if (spec.envelope) return spec.envelope(i, j);
  require(spec.search_box.has_value(), "envelope: no envelope oracle and no search box");
  RateRange r{kInfinity, -kInfinity};
  detail::for_each_grid_point(*spec.search_box, [&](StatePoint x) {
    const double v = spec.rate(i, j, x);
    r.inf = std::min(r.inf, v);
    r.sup = std::max(r.sup, v);
  });
  return r;
}

struct EnvelopePair {
  enum class Provenance { closed_form, grid };
  RateMatrix q_star;
  RateMatrix q_bar;
  Provenance provenance = Provenance::closed_form;
  std::size_t grid_resolution = 0;
};

enum class EnvelopeSide { lower, upper };

/// Off-diagonal row i of q* (lower) or q̄ (upper), as rates to targets
/// [first, first + rates.size()).
///
///   q̄_ij = inf_x min_{j<l<=i} q_lj(x)  (j < i),   sup_x max_{l<=i} q_lj(x)  (j > i)
///   q*_ij = sup_x max_{l>=i} q_lj(x)   (j < i),   inf_x min_{i<=l<j} q_lj(x) (j > i)
///
/// The q* ranges are the mirror image of the q̄ ones under i -> -i; this is
/// what makes the lower chain stay below the state-dependent one.
struct EnvelopeRow {
  State first = 0;
  std::vector<double> rates;
};

inline EnvelopeRow envelope_row(const StateDependentRateSpec& spec, EnvelopeSide side, State i,
                                const std::function<RateRange(State, State)>& range) {
  const std::size_t c = spec.bandwidth;
  const State lo = i >= c ? i - c : 0;
  State hi = i + c;
  if (spec.n_states) hi = std::min(hi, *spec.n_states - 1);
  EnvelopeRow row{lo, std::vector<double>(hi - lo + 1, 0.0)};
  auto in_band = [&](State l, State j) {
    const std::size_t d = l > j ? l - j : j - l;
    return d != 0 && d <= spec.bandwidth_of(l);
  };
  for (State j = lo; j <= hi; ++j) {
    if (j == i) continue;
    double v = 0.0;
    if (side == EnvelopeSide::upper) {
      if (j < i) {
        double m = kInfinity;
        for (State l = j + 1; l <= i; ++l) m = std::min(m, in_band(l, j) ? range(l, j).inf : 0.0);
        v = m;
      } else {
        double m = 0.0;
        for (State l = j >= c ? j - c : 0; l <= i; ++l) {
          if (in_band(l, j)) m = std::max(m, range(l, j).sup);
        }
        v = m;
      }
    } else {
      if (j < i) {
        double m = 0.0;
        State top = j + c;
        if (spec.n_states) top = std::min(top, *spec.n_states - 1);
        for (State l = i; l <= top; ++l) {
          if (in_band(l, j)) m = std::max(m, range(l, j).sup);
        }
        v = m;
      } else {
        double m = kInfinity;
        for (State l = i; l < j; ++l) m = std::min(m, in_band(l, j) ? range(l, j).inf : 0.0);
        v = m;
      }
    }
    row.rates[j - lo] = std::max(v, 0.0);
  }
  return row;
}

/// Envelope generators q* and q̄ of a state-dependent spec.
///
/// Finite S is materialized whole; countable S needs `window`, the number of
/// leading states to materialize (rows near the window edge are truncated).
/// Pair ranges come from the closed-form oracle when present, else from the
/// grid over the search box (recorded in the provenance).
inline EnvelopePair envelope_matrices(const StateDependentRateSpec& spec, std::optional<std::size_t> window = {}) {
  require(spec.rate || spec.envelope, "envelope: spec has no rates");
  require(spec.envelope || spec.search_box.has_value(), "envelope: no envelope oracle and no search box");
  require(spec.n_states.has_value() || window.has_value(), "envelope: countable S needs a materialization window");
  const std::size_t n = spec.n_states ? *spec.n_states : *window;
  require(n > 0, "envelope: empty state space");

  // Cache the pair ranges; every envelope entry is a max/min over them.
  const std::size_t c = spec.bandwidth;
  const std::size_t width = 2 * c + 1;
  std::vector<RateRange> cache(n * width);
  std::vector<bool> have(n * width, false);
  std::function<RateRange(State, State)> range = [&](State l, State j) -> RateRange {
    if (l >= n || j >= n) return rate_range(spec, l, j);
    const std::size_t k = l * width + (j + c - l);
    if (!have[k]) {
      cache[k] = rate_range(spec, l, j);
      have[k] = true;
    }
    return cache[k];
  };

  std::vector<EnvelopeRow> lower_rows, upper_rows;
  lower_rows.reserve(n);
  upper_rows.reserve(n);
  for (State i = 0; i < n; ++i) {
    lower_rows.push_back(envelope_row(spec, EnvelopeSide::lower, i, range));
    upper_rows.push_back(envelope_row(spec, EnvelopeSide::upper, i, range));
  }
  auto pick = [n](const std::vector<EnvelopeRow>& rows) {
    return [&rows, n](State i, State j) {
      const EnvelopeRow& r = rows[i];
      if (j < r.first || j >= r.first + r.rates.size() || j >= n) return 0.0;
      return r.rates[j - r.first];
    };
  };
  EnvelopePair out{RateMatrix(n, c, pick(lower_rows)), RateMatrix(n, c, pick(upper_rows)),
                   spec.envelope ? EnvelopePair::Provenance::closed_form : EnvelopePair::Provenance::grid,
                   spec.envelope ? 0 : spec.search_box->resolution};
  return out;
}

/// The spec whose rates are q_{p(a) p(b)}(x), i.e. new state a is old state p(a).
struct ReorderedSpec {
  StateDependentRateSpec spec;
  std::vector<double> beta;
  std::vector<State> permutation;  // permutation[a] = old index of new state a
};

/// Relabels a finite spec so that beta becomes nondecreasing (stable sort).
/// Envelopes depend on state order, so compute them after this step.
inline ReorderedSpec reorder_by_beta(const StateDependentRateSpec& spec, const std::vector<double>& beta) {
  require(spec.n_states.has_value(), "reorder_by_beta: finite state space required");
  const std::size_t n = *spec.n_states;
  require(beta.size() == n, "reorder_by_beta: beta length must equal the state count");
  std::vector<State> perm(n);
  std::iota(perm.begin(), perm.end(), State{0});
  std::stable_sort(perm.begin(), perm.end(), [&](State a, State b) { return beta[a] < beta[b]; });
  std::vector<State> inverse(n);
  for (State a = 0; a < n; ++a) inverse[perm[a]] = a;

  // Bandwidth in the new labels: the widest |a - b| over old in-band pairs.
  std::size_t band = 0;
  std::vector<std::size_t> per_state(n, 0);
  for (State a = 0; a < n; ++a) {
    const State old = perm[a];
    const auto [lo, hi] = spec.target_range(old);
    for (State j = lo; j <= hi; ++j) {
      if (j == old) continue;
      const State b = inverse[j];
      const std::size_t d = a > b ? a - b : b - a;
      per_state[a] = std::max(per_state[a], d);
    }
    band = std::max(band, per_state[a]);
  }

  ReorderedSpec out;
  out.permutation = perm;
  out.beta.resize(n);
  for (State a = 0; a < n; ++a) out.beta[a] = beta[perm[a]];
  StateDependentRateSpec& s = out.spec;
  s.n_states = n;
  s.dim = spec.dim;
  s.k0 = spec.k0;
  s.bandwidth = band;
  s.state_bandwidths = per_state;
  s.search_box = spec.search_box;
  auto rate = spec.rate;
  s.rate = [rate, perm](State a, State b, StatePoint x) { return rate(perm[a], perm[b], x); };
  if (spec.envelope) {
    auto env = spec.envelope;
    s.envelope = [env, perm](State a, State b) { return env(perm[a], perm[b]); };
  }
  return out;
}

/// q_ij(x) = base + scale * |i - j| * min(|x|^2, 1) on {0, ..., n-1}, full
/// bandwidth, with the exact inf/sup over x as envelope oracle.
inline StateDependentRateSpec distance_saturation_family(std::size_t n, double base = 1.0, double scale = 1.0,
                                                         std::size_t dim = 1) {
  require(n >= 1, "family needs at least one state");
  require(base >= 0.0 && base + scale >= 0.0, "family rates must stay nonnegative");
  StateDependentRateSpec spec;
  spec.n_states = n;
  spec.dim = dim;
  spec.bandwidth = n - 1;
  spec.rate = [base, scale](State i, State j, StatePoint x) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    const double d = static_cast<double>(i > j ? i - j : j - i);
    return base + scale * d * std::min(r2, 1.0);
  };
  spec.envelope = [base, scale](State i, State j) {
    const double d = static_cast<double>(i > j ? i - j : j - i);
    const double a = base, b = base + scale * d;
    return RateRange{std::min(a, b), std::max(a, b)};
  };
  double k0 = 0.0;
  for (State i = 0; i < n; ++i) {
    double lo = 0.0, hi = 0.0;
    for (State j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = static_cast<double>(i > j ? i - j : j - i);
      lo += base;
      hi += base + scale * d;
    }
    k0 = std::max({k0, lo, hi});
  }
  spec.k0 = k0;
  spec.search_box = SearchBox{std::vector<double>(dim, -2.0), std::vector<double>(dim, 2.0), 64};
  return spec;
}

}  // namespace switchbound
