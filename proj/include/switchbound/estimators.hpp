#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "switchbound/common.hpp"
#include "switchbound/coupling.hpp"
#include "switchbound/rate_matrix.hpp"
#include "switchbound/semigroup.hpp"
#include "switchbound/sim.hpp"

namespace switchbound {

struct EstimateWithCI {
  double estimate = 0.0;
  double se = 0.0;
  std::size_t replicas = 0;
  std::string estimator;
  double z = 3.0;

  double half_width() const { return z * se; }
  bool covers(double value) const { return std::abs(value - estimate) <= half_width(); }
};

/// Mean and standard error (sample variance, n - 1) in the given order with
/// compensated sums, so the result depends only on the sequence.
inline EstimateWithCI mean_with_se(std::span<const double> values, std::string estimator) {
  require(!values.empty(), "estimate: empty ensemble");
  CompensatedSum sum;
  for (double v : values) sum.add(v);
  const double n = static_cast<double>(values.size());
  const double mean = sum.value() / n;
  CompensatedSum sq;
  for (double v : values) sq.add((v - mean) * (v - mean));
  const double var = values.size() > 1 ? sq.value() / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n), values.size(), std::move(estimator)};
}

/// Lebesgue measure of {s in [0, t] : a(s) != b(s)} by a sweep over the union
/// of jump epochs.
inline double disagreement_time(const ChainPath& a, const ChainPath& b, double t) {
  double total = 0.0;
  double last = 0.0;
  State sa = a.initial, sb = b.initial;
  std::size_t ia = 0, ib = 0;
  while (true) {
    const double ta = ia < a.jumps.size() ? a.jumps[ia].time : kInfinity;
    const double tb = ib < b.jumps.size() ? b.jumps[ib].time : kInfinity;
    const double next = std::min({ta, tb, t});
    if (sa != sb) total += next - last;
    last = next;
    if (next >= t) break;
    if (ta == next) sa = a.jumps[ia++].state;
    if (tb == next) sb = b.jumps[ib++].state;
  }
  return total;
}

/// Θ̂(t): replica mean of (1/t) Leb{s <= t : Λ_s != Λ̃_s}.
inline EstimateWithCI estimate_theta(std::span<const PerturbationPair> pairs, double t) {
  require(!pairs.empty(), "estimate_theta: empty ensemble");
  require(pairs.size() >= 2, "estimate_theta: at least two replicas required");
  require(t > 0.0, "estimate_theta: t must be positive");
  std::vector<double> values;
  values.reserve(pairs.size());
  for (const auto& p : pairs) {
    require(p.first.horizon >= t && p.second.horizon >= t, "estimate_theta: pair horizon shorter than t");
    values.push_back(disagreement_time(p.first, p.second, t) / t);
  }
  return mean_with_se(values, "theta-sweep");
}

namespace detail {

/// d(s) = P(Λ_s != Λ̃_s) for the coupling chain started on the diagonal,
/// by uniformization: d(s) = sum_k Pois(k; L s) b_k with b_k the apart mass of
/// e_{(i0 i0)} P^k, P = I + G/L. The b_k are cached, so every quadrature node
/// reuses the vector powers computed for earlier nodes.
class DisagreementCurve {
 public:
  DisagreementCurve(const RateMatrix& g, std::size_t n, State i0) : n_(n) {
    const std::size_t m = g.size();
    rate_ = 0.0;
    for (State k = 0; k < m; ++k) rate_ = std::max(rate_, g.exit_rate(k));
    dense_ = g.to_dense();
    if (rate_ > 0.0) {
      dense_ /= rate_;
      dense_ += DenseMatrix::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    }
    row_ = DenseVector::Zero(static_cast<Eigen::Index>(m));
    row_(static_cast<Eigen::Index>(pair_index(n, i0, i0))) = 1.0;
    apart_.push_back(apart_mass(row_));
  }

  double operator()(double s) {
    if (rate_ == 0.0 || s <= 0.0) return 0.0;
    const double lambda = rate_ * s;
    const auto kmax = static_cast<std::size_t>(lambda + 12.0 * std::sqrt(lambda) + 30.0);
    while (apart_.size() <= kmax) {
      row_ = (row_.transpose() * dense_).transpose();
      apart_.push_back(apart_mass(row_));
    }
    const double log_lambda = std::log(lambda);
    CompensatedSum sum;
    for (std::size_t k = 0; k <= kmax; ++k) {
      if (apart_[k] == 0.0) continue;
      const double w = std::exp(-lambda + static_cast<double>(k) * log_lambda - std::lgamma(static_cast<double>(k) + 1.0));
      sum.add(w * apart_[k]);
    }
    return std::clamp(sum.value(), 0.0, 1.0);
  }

 private:
  double apart_mass(const DenseVector& v) const {
    double s = 0.0;
    for (State i = 0; i < n_; ++i) {
      for (State j = 0; j < n_; ++j) {
        if (i != j) s += v(static_cast<Eigen::Index>(pair_index(n_, i, j)));
      }
    }
    return std::max(s, 0.0);
  }

  std::size_t n_;
  double rate_ = 0.0;
  DenseMatrix dense_;
  DenseVector row_;
  std::vector<double> apart_;
};

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                               double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// ∫_a^b f by adaptive Simpson to absolute tolerance `tol`. The interval is
/// first split into `pieces` equal parts so that narrow features near 0 are
/// not missed by the first estimate.
inline double integrate_simpson(const std::function<double(double)>& f, double a, double b, double tol, int pieces = 16) {
  double total = 0.0;
  const double h = (b - a) / pieces;
  for (int k = 0; k < pieces; ++k) {
    const double lo = a + k * h, hi = k + 1 == pieces ? b : a + (k + 1) * h;
    const double flo = f(lo), fhi = f(hi), fm = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
    total += detail::adaptive_simpson(f, lo, hi, flo, fm, fhi, whole, tol / pieces, 40);
  }
  return total;
}

/// Exact Θ(t) = (1/t) ∫_0^t P(Λ_s != Λ̃_s) ds for the block-layout coupling
/// started at (i0, i0); the integral is accurate to `tol` absolute.
inline double exact_theta(const RateMatrix& q, const RateMatrix& qt, State i0, double t, double tol = 1e-10) {
  require(q.size() == qt.size(), "exact_theta: dimension mismatch");
  require(q.size() <= 60, "exact_theta: N too large for the product space (N <= 60)");
  require(i0 < q.size(), "exact_theta: initial state outside S");
  require(t > 0.0 && std::isfinite(t), "exact_theta: t must be positive");
  const RateMatrix g = coupling_generator(q, qt);
  detail::DisagreementCurve d(g, q.size(), i0);
  std::function<double(double)> f = [&d](double s) { return d(s); };
  return integrate_simpson(f, 0.0, t, tol * t) / t;
}

struct OrderViolation {
  std::size_t replica = 0;
  double time = 0.0;
  State star = 0;
  State lambda = 0;
  State bar = 0;
};

struct OrderReport {
  std::size_t count = 0;
  std::size_t checked_epochs = 0;
  std::vector<OrderViolation> violations;  // the first `max_details` of them
};

/// Checks Λ* <= Λ <= Λ̄ at time 0 and at every jump epoch of every bundle.
inline OrderReport order_violations(std::span<const ComparisonBundle> bundles, std::size_t max_details = 16) {
  OrderReport report;
  for (std::size_t r = 0; r < bundles.size(); ++r) {
    const ComparisonBundle& b = bundles[r];
    std::vector<double> epochs{0.0};
    for (const auto* path : {&b.lambda, &b.star, &b.bar}) {
      for (const auto& j : path->jumps) epochs.push_back(j.time);
    }
    std::sort(epochs.begin(), epochs.end());
    epochs.erase(std::unique(epochs.begin(), epochs.end()), epochs.end());
    for (double t : epochs) {
      ++report.checked_epochs;
      const State s = b.star.state_at(t), l = b.lambda.state_at(t), u = b.bar.state_at(t);
      if (s <= l && l <= u) continue;
      ++report.count;
      if (report.violations.size() < max_details) report.violations.push_back({r, t, s, l, u});
    }
  }
  return report;
}

struct TransitionCheck {
  std::vector<double> tv;             // per start state; NaN where no path started there
  std::vector<std::size_t> replicas;  // paths per start state
  double threshold = 0.02;
  bool pass = false;

  double max_tv() const {
    double m = 0.0;
    for (double v : tv) {
      if (!std::isnan(v)) m = std::max(m, v);
    }
    return m;
  }
};

/// Empirical law of Λ_t grouped by Λ_0, against the rows of exp(tQ).
inline TransitionCheck empirical_transition_check(std::span<const ChainPath> paths, const RateMatrix& q, double t,
                                                  double threshold = 0.02) {
  const std::size_t n = q.size();
  std::vector<std::vector<double>> counts(n, std::vector<double>(n, 0.0));
  TransitionCheck out;
  out.threshold = threshold;
  out.replicas.assign(n, 0);
  for (const auto& p : paths) {
    require(p.initial < n && p.horizon >= t, "empirical_transition_check: path outside S or too short");
    const State s = p.state_at(t);
    require(s < n, "empirical_transition_check: state outside S");
    counts[p.initial][s] += 1.0;
    ++out.replicas[p.initial];
  }
  const DenseMatrix pt = t > 0.0 ? transition_semigroup(q, t) : DenseMatrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  out.tv.assign(n, std::nan(""));
  bool any = false;
  out.pass = true;
  for (State i = 0; i < n; ++i) {
    if (out.replicas[i] == 0) continue;
    any = true;
    double tv = 0.0;
    for (State j = 0; j < n; ++j) {
      tv += std::abs(counts[i][j] / static_cast<double>(out.replicas[i]) - pt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    out.tv[i] = tv;
    if (tv >= threshold) out.pass = false;
  }
  out.pass = out.pass && any;
  return out;
}

struct MomentCurve {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> se;
  double p_prime = 0.0;
  std::size_t replicas = 0;
  std::size_t divergent = 0;
  bool reliable = true;  // false when more than 1% of replicas diverged
};

/// Ê|X_t|^{p'} over the non-divergent bundles at each grid time; |x| is the
/// Euclidean norm. X_t is read from the last recorded point at or before t.
inline MomentCurve moment_decay(std::span<const ComparisonBundle> bundles, double p_prime, std::span<const double> t_grid) {
  require(p_prime > 0.0, "moment_decay: p' must be positive");
  require(!bundles.empty(), "moment_decay: empty ensemble");
  MomentCurve out;
  out.p_prime = p_prime;
  out.times.assign(t_grid.begin(), t_grid.end());
  out.replicas = bundles.size();
  for (const auto& b : bundles) {
    if (b.diverged) ++out.divergent;
  }
  out.reliable = static_cast<double>(out.divergent) <= 0.01 * static_cast<double>(bundles.size());
  std::vector<double> values;
  for (double t : t_grid) {
    values.clear();
    for (const auto& b : bundles) {
      if (b.diverged) continue;
      const auto& times = b.diffusion.times;
      require(!times.empty(), "moment_decay: bundle has no recorded diffusion");
      auto it = std::upper_bound(times.begin(), times.end(), t + 1e-12);
      require(it != times.begin(), "moment_decay: grid time before the first recorded point");
      const auto x = b.diffusion.at(static_cast<std::size_t>(std::prev(it) - times.begin()));
      double norm2 = 0.0;
      for (double v : x) norm2 += v * v;
      values.push_back(std::pow(std::sqrt(norm2), p_prime));
    }
    if (values.empty()) {
      out.mean.push_back(std::nan(""));
      out.se.push_back(std::nan(""));
      continue;
    }
    const EstimateWithCI e = mean_with_se(values, "moment");
    out.mean.push_back(e.estimate);
    out.se.push_back(e.se);
  }
  return out;
}

/// L2-Wasserstein distance of two empirical laws on R: the L2 distance of
/// their quantile functions, integrated exactly over the merged breakpoints.
/// Equal sample counts reduce to sorted pairing.
inline double wasserstein1d_empirical(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), "wasserstein1d: empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  CompensatedSum sum;
  std::size_t i = 0, j = 0;
  double u = 0.0;
  while (i < a.size() && j < b.size()) {
    const double ua = static_cast<double>(i + 1) / na, ub = static_cast<double>(j + 1) / nb;
    const double next = std::min(ua, ub);
    const double d = a[i] - b[j];
    sum.add((next - u) * d * d);
    u = next;
    if (ua <= next) ++i;
    if (ub <= next) ++j;
  }
  return std::sqrt(std::max(sum.value(), 0.0));
}

}  // namespace switchbound
