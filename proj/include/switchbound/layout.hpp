#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <iomanip>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "switchbound/common.hpp"
#include "switchbound/rate_matrix.hpp"

namespace switchbound {

enum class LayoutKind { classical, comparison_signed, block };

inline const char* to_string(LayoutKind kind) {
  switch (kind) {
    case LayoutKind::classical: return "classical";
    case LayoutKind::comparison_signed: return "comparison";
    case LayoutKind::block: return "block";
  }
  return "?";
}

/// Half-open interval [lo, lo + length) assigned to one jump target. The
/// length is stored, not recomputed, so it equals the generating rate exactly.
struct Interval {
  State target = 0;
  double lo = 0.0;
  double length = 0.0;
  double hi() const { return lo + length; }
  bool contains(double z) const { return lo <= z && z < hi(); }
};

/// Disjoint intervals of one source state, sorted by left endpoint.
struct LayoutEntry {
  std::vector<Interval> intervals;

  double total_length() const {
    double s = 0.0;
    for (const auto& iv : intervals) s += iv.length;
    return s;
  }
  double min_lo() const { return intervals.empty() ? 0.0 : intervals.front().lo; }
  double max_hi() const {
    double m = 0.0;
    for (const auto& iv : intervals) m = std::max(m, iv.hi());
    return m;
  }
};

/// Finite union of disjoint half-open segments; marks are drawn uniformly on it.
struct MarkWindow {
  struct Segment {
    double lo = 0.0;
    double hi = 0.0;
  };
  std::vector<Segment> segments;

  static MarkWindow symmetric(double half_width) { return MarkWindow{{{-half_width, half_width}}}; }
  static MarkWindow span(double lo, double hi) { return MarkWindow{{{lo, hi}}}; }

  double measure() const {
    double s = 0.0;
    for (const auto& seg : segments) s += seg.hi - seg.lo;
    return s;
  }
  bool covers(double lo, double hi) const {
    for (const auto& seg : segments) {
      if (seg.lo <= lo && hi <= seg.hi) return true;
    }
    return false;
  }
  /// Maps u in (0, 1) to a point of the window, uniformly.
  double sample(double u) const {
    double offset = u * measure();
    for (const auto& seg : segments) {
      const double w = seg.hi - seg.lo;
      if (offset < w) return seg.lo + offset;
      offset -= w;
    }
    return segments.back().lo + std::max(0.0, segments.back().hi - segments.back().lo) * u;
  }
};

/// Parameters of the block layout: every rate <= k0 and every band <= c0.
struct BlockGeometry {
  std::size_t c0 = 1;
  double k0 = 1.0;

  /// Block U_n of state s (0-based): [0, c0 K0) for s = 0 and
  /// [(2s - 1) c0 K0, (2s + 1) c0 K0) otherwise.
  MarkWindow::Segment block(State s) const {
    const double w = static_cast<double>(c0) * k0;
    if (s == 0) return {0.0, w};
    return {(2.0 * static_cast<double>(s) - 1.0) * w, (2.0 * static_cast<double>(s) + 1.0) * w};
  }
  double block_measure(State s) const { return block(s).hi - block(s).lo; }

  /// Left endpoint of the (s -> t) interval; it depends only on (s, t, c0, K0).
  double left_endpoint(State s, State t) const {
    const double base = 2.0 * static_cast<double>(s) * static_cast<double>(c0) * k0;
    if (t > s) return base + static_cast<double>(t - s - 1) * k0;
    return base - static_cast<double>(s - t) * k0;
  }
};

/// Per-state interval layout of a generator.
struct IntervalLayout {
  LayoutKind kind = LayoutKind::classical;
  std::vector<LayoutEntry> entries;
  MarkWindow window;
  std::optional<BlockGeometry> blocks;  // block layouts only

  const LayoutEntry& entry(State i) const { return entries.at(i); }
};

/// Jump target of state i's entry for mark z, or nothing when z misses every
/// interval (a thinned mark). Membership is lo <= z < hi, compared exactly.
inline std::optional<State> mark_to_jump(const LayoutEntry& entry, double z) {
  const auto& ivs = entry.intervals;
  auto it = std::upper_bound(ivs.begin(), ivs.end(), z, [](double v, const Interval& iv) { return v < iv.lo; });
  if (it == ivs.begin()) return std::nullopt;
  --it;
  if (it->contains(z)) return it->target;
  return std::nullopt;
}

/// Ghosh-style layout: row i's intervals laid consecutively in ascending
/// target order, rows concatenated in state order on [0, sum_i |q_ii|).
inline IntervalLayout build_classical_layout(const RateMatrix& q) {
  IntervalLayout layout{LayoutKind::classical, std::vector<LayoutEntry>(q.size()), {}, {}};
  double row_start = 0.0;
  for (State i = 0; i < q.size(); ++i) {
    double cursor = row_start;
    for (State j = 0; j < q.size(); ++j) {
      const double r = q.rate(i, j);
      if (r <= 0.0) continue;
      layout.entries[i].intervals.push_back({j, cursor, r});
      cursor += r;
    }
    row_start += q.exit_rate(i);
  }
  layout.window = MarkWindow::span(0.0, std::max(row_start, std::nextafter(0.0, 1.0)));
  return layout;
}

/// Signed comparison layout of one row: downward targets packed on [0, inf)
/// in ascending order (j = lowest first), upward targets packed leftwards
/// from 0 with the farthest target nearest zero.
///
/// `row[j]` is the rate to target `first + j`; entries for the source itself
/// are ignored. Throws if a positive rate lies beyond `bandwidth`.
inline LayoutEntry build_comparison_entry(State i, State first, std::span<const double> row, std::size_t bandwidth) {
  LayoutEntry entry;
  double down = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    const State j = first + k;
    if (j >= i) break;
    const double r = row[k];
    if (r <= 0.0) continue;
    require(i - j <= bandwidth, "comparison layout: positive rate beyond the declared bandwidth");
    entry.intervals.push_back({j, down, r});
    down += r;
  }
  std::vector<Interval> up;
  double left = 0.0;
  for (std::size_t k = row.size(); k-- > 0;) {
    const State j = first + k;
    if (j <= i) break;
    const double r = row[k];
    if (r <= 0.0) continue;
    require(j - i <= bandwidth, "comparison layout: positive rate beyond the declared bandwidth");
    left -= r;
    up.push_back({j, left, r});
  }
  // up is ordered nearest-zero first; the sorted entry wants ascending lo.
  std::reverse(up.begin(), up.end());
  up.insert(up.end(), entry.intervals.begin(), entry.intervals.end());
  entry.intervals = std::move(up);
  return entry;
}

inline LayoutEntry build_comparison_entry(const RateMatrix& q, State i) {
  std::vector<double> row(q.size());
  for (State j = 0; j < q.size(); ++j) row[j] = q.rate(i, j);
  return build_comparison_entry(i, 0, row, q.bandwidth());
}

/// Largest downward or upward half-sum over the rows of a signed layout.
inline double signed_half_width(const LayoutEntry& entry) { return std::max(-entry.min_lo(), entry.max_hi()); }

inline IntervalLayout build_comparison_layout(const RateMatrix& q) {
  IntervalLayout layout{LayoutKind::comparison_signed, {}, {}, {}};
  layout.entries.reserve(q.size());
  double k_mark = 0.0;
  for (State i = 0; i < q.size(); ++i) {
    layout.entries.push_back(build_comparison_entry(q, i));
    k_mark = std::max(k_mark, signed_half_width(layout.entries.back()));
  }
  layout.window = MarkWindow::symmetric(std::max(k_mark, std::nextafter(0.0, 1.0)));
  return layout;
}

inline LayoutEntry build_block_entry(const RateMatrix& q, State s, const BlockGeometry& g) {
  LayoutEntry entry;
  for (State t = 0; t < q.size(); ++t) {
    const double r = q.rate(s, t);
    if (r <= 0.0) continue;
    const std::size_t d = s > t ? s - t : t - s;
    require(d <= g.c0, "block layout: band exceeds c0");
    require(r <= g.k0, "block layout: a rate exceeds K0");
    entry.intervals.push_back({t, g.left_endpoint(s, t), r});
  }
  return entry;
}

inline IntervalLayout build_block_layout(const RateMatrix& q, std::size_t c0, double k0) {
  require(c0 >= 1 && k0 > 0.0, "block layout: c0 >= 1 and K0 > 0 required");
  const BlockGeometry g{c0, k0};
  IntervalLayout layout{LayoutKind::block, {}, {}, g};
  layout.entries.reserve(q.size());
  for (State s = 0; s < q.size(); ++s) layout.entries.push_back(build_block_entry(q, s, g));
  for (State s = 0; s < q.size(); ++s) layout.window.segments.push_back(g.block(s));
  return layout;
}

/// Smallest symmetric window [-K, K] covering every interval of every entry.
/// `extra_half_width` folds in rows not enumerated here (e.g. K0 for the
/// state-dependent rows, whose half-sums are bounded by their exit rate).
inline MarkWindow required_mark_window(std::span<const IntervalLayout* const> layouts, double extra_half_width = 0.0) {
  double k_mark = extra_half_width;
  bool any_block = false;
  for (const IntervalLayout* layout : layouts) {
    if (layout->kind == LayoutKind::block) {
      any_block = true;
      continue;
    }
    for (const auto& e : layout->entries) k_mark = std::max(k_mark, signed_half_width(e));
  }
  if (any_block) {
    // Union of the active blocks, merged where adjacent.
    std::vector<MarkWindow::Segment> segs;
    for (const IntervalLayout* layout : layouts) {
      if (layout->kind == LayoutKind::block) segs.insert(segs.end(), layout->window.segments.begin(), layout->window.segments.end());
    }
    std::sort(segs.begin(), segs.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
    MarkWindow w;
    for (const auto& s : segs) {
      if (!w.segments.empty() && s.lo <= w.segments.back().hi) {
        w.segments.back().hi = std::max(w.segments.back().hi, s.hi);
      } else {
        w.segments.push_back(s);
      }
    }
    return w;
  }
  require(k_mark > 0.0, "required_mark_window: every participating row is empty");
  return MarkWindow::symmetric(k_mark);
}

inline MarkWindow required_mark_window(std::initializer_list<const IntervalLayout*> layouts, double extra_half_width = 0.0) {
  return required_mark_window(std::span<const IntervalLayout* const>(layouts.begin(), layouts.size()), extra_half_width);
}

/// Debug dump, one interval per line: "i j a b kind" (1-based states, fixed
/// decimal with 12 digits).
inline void dump_layout(std::ostream& out, const IntervalLayout& layout) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::fixed << std::setprecision(12);
  for (State i = 0; i < layout.entries.size(); ++i) {
    for (const auto& iv : layout.entries[i].intervals) {
      out << (i + 1) << ' ' << (iv.target + 1) << ' ' << iv.lo << ' ' << iv.hi() << ' ' << to_string(layout.kind) << '\n';
    }
  }
  out.flags(flags);
  out.precision(prec);
}

}  // namespace switchbound
