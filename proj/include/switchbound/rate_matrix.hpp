#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "switchbound/common.hpp"

namespace switchbound {

/// Conservative generator (Q-matrix) on {0, ..., n-1} with banded storage.
///
/// Only off-diagonal rates are stored; the diagonal is always minus the row's
/// off-diagonal sum, accumulated in ascending target order. Entries with
/// |i - j| > bandwidth are zero by construction. Immutable once built.
class RateMatrix {
 public:
  RateMatrix() = default;

  /// Builds from `rate(i, j)`, queried for every i != j with |i - j| <= bandwidth.
  template <class RateFn>
  RateMatrix(std::size_t n, std::size_t bandwidth, RateFn&& rate)
      : n_(n), c_(n == 0 ? 0 : std::min(bandwidth, n - 1)), band_(n_ * (2 * c_ + 1), 0.0), exit_(n_, 0.0) {
    require(n > 0, "rate matrix needs at least one state");
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t lo = i >= c_ ? i - c_ : 0;
      const std::size_t hi = std::min(n_ - 1, i + c_);
      double total = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) {
        if (j == i) continue;
        const double value = static_cast<double>(rate(i, j));
        if (!std::isfinite(value) || value < 0.0) {
          throw InputError("rate (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                           ") must be finite and nonnegative");
        }
        band_[slot(i, j)] = value;
        total += value;
      }
      exit_[i] = total;
      band_[slot(i, i)] = -total;
    }
  }

  /// Off-diagonal part of a dense table; the diagonal is ignored and recomputed.
  /// The bandwidth is the smallest one covering every positive rate.
  static RateMatrix from_off_diagonal(const DenseMatrix& table) {
    require(table.rows() == table.cols() && table.rows() > 0, "rate table must be square and nonempty");
    const auto n = static_cast<std::size_t>(table.rows());
    std::size_t band = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j && table(i, j) != 0.0) band = std::max(band, i > j ? i - j : j - i);
      }
    }
    return RateMatrix(n, band, [&](std::size_t i, std::size_t j) { return table(i, j); });
  }

  std::size_t size() const { return n_; }
  std::size_t bandwidth() const { return c_; }

  /// q_ij for i != j (zero outside the band); q_ii for i == j.
  double operator()(std::size_t i, std::size_t j) const {
    const std::size_t d = i > j ? i - j : j - i;
    if (d > c_) return 0.0;
    return band_[slot(i, j)];
  }
  double rate(std::size_t i, std::size_t j) const { return i == j ? 0.0 : (*this)(i, j); }
  double exit_rate(std::size_t i) const { return exit_[i]; }
  double max_exit_rate() const { return exit_.empty() ? 0.0 : *std::max_element(exit_.begin(), exit_.end()); }

  /// Sum of rates to targets below i (ascending j), resp. above i (descending j).
  double downward_rate(std::size_t i) const {
    double s = 0.0;
    for (std::size_t j = i >= c_ ? i - c_ : 0; j < i; ++j) s += rate(i, j);
    return s;
  }
  double upward_rate(std::size_t i) const {
    double s = 0.0;
    for (std::size_t j = std::min(n_ - 1, i + c_); j > i; --j) s += rate(i, j);
    return s;
  }

  DenseMatrix to_dense() const {
    require(n_ <= kMaxDenseStates, "generator too large for dense linear algebra");
    DenseMatrix out = DenseMatrix::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t lo = i >= c_ ? i - c_ : 0;
      const std::size_t hi = std::min(n_ - 1, i + c_);
      for (std::size_t j = lo; j <= hi; ++j) out(i, j) = band_[slot(i, j)];
    }
    return out;
  }

  friend bool operator==(const RateMatrix& a, const RateMatrix& b) {
    if (a.n_ != b.n_) return false;
    const std::size_t c = std::max(a.c_, b.c_);
    for (std::size_t i = 0; i < a.n_; ++i) {
      for (std::size_t j = i >= c ? i - c : 0; j <= std::min(a.n_ - 1, i + c); ++j) {
        if (a(i, j) != b(i, j)) return false;
      }
    }
    return true;
  }

 private:
  std::size_t slot(std::size_t i, std::size_t j) const { return i * (2 * c_ + 1) + (j + c_ - i); }

  std::size_t n_ = 0;
  std::size_t c_ = 0;
  std::vector<double> band_;
  std::vector<double> exit_;
};

/// Probability vector on a finite state space; entries >= 0 summing to 1 within 1e-12.
class ProbabilityVector {
 public:
  ProbabilityVector() = default;
  explicit ProbabilityVector(std::vector<double> weights) : w_(std::move(weights)) {
    require(!w_.empty(), "probability vector must be nonempty");
    double total = 0.0;
    for (double v : w_) {
      require(std::isfinite(v) && v >= 0.0, "probability weights must be nonnegative");
      total += v;
    }
    require(std::abs(total - 1.0) <= 1e-12, "probability weights must sum to 1");
  }

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  const std::vector<double>& weights() const { return w_; }

 private:
  std::vector<double> w_;
};

struct Violation {
  std::string code;  // non-conservative, negative-rate, non-finite, bandwidth, rate-bound
  std::string message;
};
using ValidationReport = std::vector<Violation>;

/// Checks a full generator table (diagonal included).
inline ValidationReport validate(const DenseMatrix& table, std::optional<std::size_t> bandwidth = {},
                                 std::optional<double> k0 = {}) {
  ValidationReport report;
  if (table.rows() != table.cols() || table.rows() == 0) {
    report.push_back({"shape", "rate table must be square and nonempty"});
    return report;
  }
  const auto n = static_cast<std::size_t>(table.rows());
  for (std::size_t i = 0; i < n; ++i) {
    double off = 0.0;
    bool finite = true;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = table(i, j);
      const std::string where = "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
      if (!std::isfinite(v)) {
        report.push_back({"non-finite", "non-finite entry " + where});
        finite = false;
        continue;
      }
      if (i == j) continue;
      if (v < 0.0) report.push_back({"negative-rate", "negative rate " + where});
      const std::size_t d = i > j ? i - j : j - i;
      if (bandwidth && d > *bandwidth && v != 0.0) {
        report.push_back({"bandwidth", "rate " + where + " beyond bandwidth " + std::to_string(*bandwidth)});
      }
      off += v;
    }
    if (!finite) continue;
    const double scale = std::max(1.0, std::abs(table(i, i)) + off);
    if (std::abs(off + table(i, i)) > 1e-12 * scale) {
      report.push_back({"non-conservative", "non-conservative row " + std::to_string(i + 1)});
    }
    if (k0 && off > *k0 * (1.0 + 1e-12)) {
      report.push_back({"rate-bound", "row " + std::to_string(i + 1) + " exit rate exceeds K0"});
    }
  }
  return report;
}

/// A built RateMatrix is conservative and nonnegative by construction; this
/// checks the declared (K0, bandwidth) metadata against it.
inline ValidationReport validate(const RateMatrix& q, std::optional<std::size_t> bandwidth = {},
                                 std::optional<double> k0 = {}) {
  ValidationReport report;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (k0 && q.exit_rate(i) > *k0 * (1.0 + 1e-12)) {
      report.push_back({"rate-bound", "row " + std::to_string(i + 1) + " exit rate exceeds K0"});
    }
    if (bandwidth && q.bandwidth() > *bandwidth) {
      for (std::size_t j = 0; j < q.size(); ++j) {
        const std::size_t d = i > j ? i - j : j - i;
        if (d > *bandwidth && q.rate(i, j) != 0.0) {
          report.push_back({"bandwidth", "rate (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                             ") beyond bandwidth " + std::to_string(*bandwidth)});
        }
      }
    }
  }
  return report;
}

inline std::string describe(const ValidationReport& report) {
  std::string out;
  for (const auto& v : report) {
    if (!out.empty()) out += "; ";
    out += v.message;
  }
  return out;
}

/// Builds a generator from a full table, refusing anything `validate` flags.
inline RateMatrix generator_from_table(const DenseMatrix& table) {
  const auto report = validate(table);
  if (!report.empty()) throw InputError(describe(report));
  return RateMatrix::from_off_diagonal(table);
}

/// sup_i sum_j |a_ij - b_ij|, diagonals included.
inline double l1_diff_norm(const RateMatrix& a, const RateMatrix& b) {
  require(a.size() == b.size(), "l1_diff_norm: dimension mismatch");
  const std::size_t n = a.size();
  const std::size_t c = std::max(a.bandwidth(), b.bandwidth());
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = i >= c ? i - c : 0; j <= std::min(n - 1, i + c); ++j) row += std::abs(a(i, j) - b(i, j));
    best = std::max(best, row);
  }
  return best;
}

/// inf_i sum_{j != i} |a_ij - b_ij|.
inline double min_offdiag_diff(const RateMatrix& a, const RateMatrix& b) {
  require(a.size() == b.size(), "min_offdiag_diff: dimension mismatch");
  const std::size_t n = a.size();
  const std::size_t c = std::max(a.bandwidth(), b.bandwidth());
  double best = kInfinity;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = i >= c ? i - c : 0; j <= std::min(n - 1, i + c); ++j) {
      if (j != i) row += std::abs(a(i, j) - b(i, j));
    }
    best = std::min(best, row);
  }
  return best;
}

/// sup_{|h|<=1} |sum_i h_i (mu_i - nu_i)| = sum_i |mu_i - nu_i|.
inline double tv_distance(const std::vector<double>& mu, const std::vector<double>& nu) {
  require(mu.size() == nu.size(), "tv_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) s += std::abs(mu[i] - nu[i]);
  return s;
}
inline double tv_distance(const ProbabilityVector& mu, const ProbabilityVector& nu) {
  return tv_distance(mu.weights(), nu.weights());
}

/// Number of strongly connected components of the positive-rate digraph
/// (iterative Tarjan). The generator is irreducible iff this is 1.
inline std::size_t strong_component_count(const RateMatrix& q) {
  const std::size_t n = q.size();
  const std::size_t c = q.bandwidth();
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, kUnset), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::size_t counter = 0, components = 0;

  struct Frame {
    std::size_t node;
    std::size_t next;
  };
  auto first_target = [&](std::size_t i) { return i >= c ? i - c : 0; };
  auto last_target = [&](std::size_t i) { return std::min(n - 1, i + c); };

  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnset) continue;
    std::vector<Frame> frames{{root, first_target(root)}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      Frame& f = frames.back();
      const std::size_t v = f.node;
      bool descended = false;
      while (f.next <= last_target(v)) {
        const std::size_t w = f.next++;
        if (w == v || q.rate(v, w) <= 0.0) continue;
        if (index[w] == kUnset) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.push_back({w, first_target(w)});
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        ++components;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
        } while (w != v);
      }
      frames.pop_back();
      if (!frames.empty()) low[frames.back().node] = std::min(low[frames.back().node], low[v]);
    }
  }
  return components;
}

inline bool is_irreducible(const RateMatrix& q) { return strong_component_count(q) == 1; }

/// Plain-text matrix format: a header line "N c", then N rows of N
/// whitespace-separated rates. The diagonal column is written as 0 and
/// ignored on load (recomputed from the row).
inline void write_rate_matrix(std::ostream& out, const RateMatrix& q) {
  const std::size_t n = q.size();
  out << n << ' ' << q.bandwidth() << '\n';
  std::ostringstream line;
  line << std::setprecision(17);
  for (std::size_t i = 0; i < n; ++i) {
    line.str("");
    for (std::size_t j = 0; j < n; ++j) {
      if (j) line << ' ';
      line << q.rate(i, j);
    }
    out << line.str() << '\n';
  }
}

inline RateMatrix read_rate_matrix(std::istream& in) {
  std::size_t n = 0, c = 0;
  require(static_cast<bool>(in >> n >> c), "rate matrix: missing header \"N c\"");
  require(n > 0 && n <= kMaxDenseStates, "rate matrix: bad state count");
  DenseMatrix table(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double v = 0.0;
      require(static_cast<bool>(in >> v), "rate matrix: row " + std::to_string(i + 1) + " is short");
      table(i, j) = i == j ? 0.0 : v;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < n; ++j) off += i == j ? 0.0 : table(i, j);
    table(i, i) = -off;
  }
  const auto report = validate(table, c);
  if (!report.empty()) throw InputError("rate matrix: " + describe(report));
  return RateMatrix(n, c, [&](std::size_t i, std::size_t j) { return table(i, j); });
}

}  // namespace switchbound
