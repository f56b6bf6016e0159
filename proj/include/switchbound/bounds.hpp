#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "switchbound/common.hpp"
#include "switchbound/rate_matrix.hpp"
#include "switchbound/semigroup.hpp"

namespace switchbound {

struct ThetaBounds {
  double lower_h3 = 0.0;
  double upper_h2 = 0.0;
  double upper_h25 = 0.0;
  double legacy_d8 = 0.0;
  double delta = 0.0;  // ||Q - Q̃||, max absolute row sum
  double r = 0.0;      // inf_i sum_{j != i} |q_ij - q̃_ij|
  double m = 0.0;      // 4 c0 K0
  double t = 0.0;
  std::size_t n = 0;
  bool consistent = true;  // lower_h3 <= upper_h2

  std::string flag() const { return consistent ? "" : "lower bound exceeds upper bound"; }
};

/// Checks that every rate of q is at most k0 and every positive rate lies
/// within c0 of the diagonal.
inline void require_block_hypotheses(const RateMatrix& q, std::size_t c0, double k0, const char* who) {
  for (State i = 0; i < q.size(); ++i) {
    for (State j = 0; j < q.size(); ++j) {
      const double v = q.rate(i, j);
      if (v <= 0.0) continue;
      const std::size_t d = i > j ? i - j : j - i;
      require(d <= c0, std::string(who) + ": rate (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ") outside the band c0");
      require(v <= k0, std::string(who) + ": rate (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ") exceeds K0");
    }
  }
}

inline ThetaBounds theta_bounds(const RateMatrix& q, const RateMatrix& qt, std::size_t c0, double k0, double t) {
  require(t > 0.0 && std::isfinite(t), "theta_bounds: t must be positive");
  require(q.size() == qt.size(), "theta_bounds: dimension mismatch");
  require(c0 >= 1 && k0 > 0.0, "theta_bounds: c0 >= 1 and K0 > 0 required");
  require_block_hypotheses(q, c0, k0, "theta_bounds");
  require_block_hypotheses(qt, c0, k0, "theta_bounds");
  ThetaBounds b;
  b.t = t;
  b.n = q.size();
  b.delta = l1_diff_norm(q, qt);
  b.r = min_offdiag_diff(q, qt);
  b.m = 4.0 * static_cast<double>(c0) * k0;
  b.upper_h2 = one_minus_mean_exp(b.delta * t);
  b.upper_h25 = std::min(0.5 * b.delta * t, 1.0);
  b.lower_h3 = b.r > 0.0 ? b.r / (b.m + b.delta) * one_minus_mean_exp((b.m + b.delta) * t) : 0.0;
  const double nn = static_cast<double>(b.n);
  b.legacy_d8 = nn * nn * t * b.delta;
  b.consistent = b.lower_h3 <= b.upper_h2;
  return b;
}

/// max_i ||P_t(i, ·) - P̃_t(i, ·)||_1 from the two semigroups.
inline double semigroup_distance(const RateMatrix& q, const RateMatrix& qt, double t) {
  const DenseMatrix d = transition_semigroup(q, t) - transition_semigroup(qt, t);
  return d.cwiseAbs().rowwise().sum().maxCoeff();
}

/// Geometric grid 1e-3 · 2^k up to t_max, used to bracket τ₁.
inline std::vector<double> doubling_grid(double t_max = 1e4) {
  std::vector<double> g;
  for (double t = 1e-3; t <= t_max; t *= 2.0) g.push_back(t);
  return g;
}

struct MitrophanovBound {
  double tau1 = kInfinity;
  double coefficient = kInfinity;  // e τ₁ / (e - 1)
  double delta = 0.0;
  double bound = kInfinity;  // coefficient · delta; 0 when delta = 0
};

inline MitrophanovBound mitrophanov_bound(const RateMatrix& q, const RateMatrix& qt) {
  require(q.size() == qt.size(), "mitrophanov_bound: dimension mismatch");
  require(q.size() <= kMaxDenseStates, "mitrophanov_bound: N too large");
  MitrophanovBound out;
  const auto grid = doubling_grid();
  out.tau1 = ergodicity_profile(q, grid).tau1;
  out.delta = l1_diff_norm(q, qt);
  if (std::isfinite(out.tau1)) out.coefficient = std::numbers::e * out.tau1 / (std::numbers::e - 1.0);
  out.bound = out.delta == 0.0 ? 0.0 : out.coefficient * out.delta;
  return out;
}

struct InvariantPerturbationBound {
  double bound = 0.0;
  double measured = 0.0;       // ||π - π̃||_1
  double eta_integral = 0.0;   // numeric part plus tail
  double eta_numeric = 0.0;    // trapezoid on [0, t_max]
  double tail = 0.0;           // fitted exponential integrated beyond t_max
  double tail_rate = 0.0;      // fitted decay rate of η over its last decade above 1e-12
  double delta = 0.0;
};

/// η_t = max(||P_t(i0, ·) - π||_1, ||P̃_t(i0, ·) - π̃||_1) on [0, t_max] with
/// step dt, integrated by the trapezoid rule plus an exponential tail beyond
/// t_max, λ fitted by least squares to log η over the last decade of decay
/// above 1e-12. Returns 2√2 (∫η)^{1/2} ||Q - Q̃||^{1/2} next to the measured
/// ||π - π̃||_1.
inline InvariantPerturbationBound invariant_perturbation_bound(const RateMatrix& q, const RateMatrix& qt, State i0, double t_max,
                                                               double dt) {
  require(q.size() == qt.size(), "invariant_perturbation_bound: dimension mismatch");
  require(i0 < q.size(), "invariant_perturbation_bound: initial state outside S");
  require(t_max > 0.0 && dt > 0.0 && dt < t_max, "invariant_perturbation_bound: need 0 < dt < t_max");
  require(is_irreducible(q) && is_irreducible(qt), "invariant_perturbation_bound: both generators must be irreducible");
  const auto n = static_cast<Eigen::Index>(q.size());
  const ProbabilityVector pi = invariant_measure(q), pit = invariant_measure(qt);
  DenseVector vpi(n), vpit(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    vpi(i) = pi[static_cast<std::size_t>(i)];
    vpit(i) = pit[static_cast<std::size_t>(i)];
  }
  InvariantPerturbationBound out;
  out.delta = l1_diff_norm(q, qt);
  out.measured = (vpi - vpit).cwiseAbs().sum();

  const auto steps = static_cast<std::size_t>(std::ceil(t_max / dt));
  const double h = t_max / static_cast<double>(steps);
  const DenseMatrix step = transition_semigroup(q, h), stept = transition_semigroup(qt, h);
  DenseVector a = DenseVector::Zero(n), b = DenseVector::Zero(n);
  a(static_cast<Eigen::Index>(i0)) = 1.0;
  b(static_cast<Eigen::Index>(i0)) = 1.0;
  std::vector<double> eta;
  eta.reserve(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    eta.push_back(std::max((a - vpi).cwiseAbs().sum(), (b - vpit).cwiseAbs().sum()));
    a = (a.transpose() * step).transpose();
    b = (b.transpose() * stept).transpose();
  }
  CompensatedSum trap;
  for (std::size_t k = 0; k < steps; ++k) trap.add(0.5 * h * (eta[k] + eta[k + 1]));
  out.eta_numeric = trap.value();

  // Values at or below kFloor are rounding noise and are not fitted.
  constexpr double kFloor = 1e-12;
  const double peak = *std::max_element(eta.begin(), eta.end());
  std::size_t last = steps;
  while (last > 0 && eta[last] <= kFloor) --last;
  if (last == 0) {
    out.tail = 0.0;
    out.tail_rate = kInfinity;
  } else {
    require(eta[last] <= 0.1 * peak, "invariant_perturbation_bound: eta shows no decay by t_max; increase t_max");
    std::size_t first = last;
    while (first > 0 && eta[first - 1] <= 10.0 * eta[last]) --first;
    require(last - first >= 2, "invariant_perturbation_bound: too few points to fit the tail; refine dt");
    double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
    for (std::size_t k = first; k <= last; ++k) {
      const double x = static_cast<double>(k) * h, y = std::log(eta[k]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      cnt += 1.0;
    }
    out.tail_rate = -(cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    require(out.tail_rate > 0.0, "invariant_perturbation_bound: eta tail is not decaying; increase t_max");
    out.tail = eta[last] * std::exp(-out.tail_rate * (t_max - static_cast<double>(last) * h)) / out.tail_rate;
  }
  out.eta_integral = out.eta_numeric + out.tail;
  out.bound = 2.0 * std::numbers::sqrt2 * std::sqrt(out.eta_integral) * std::sqrt(out.delta);
  return out;
}

/// Largest real part over the eigenvalues. Dense eigenvalues up to N = 500;
/// above that, A must be Metzler (off-diagonal >= 0) and the abscissa is the
/// Perron root of A + sI, s = max |a_ii|, found by power iteration to a
/// relative change below 1e-12 (at most 10^6 iterations).
inline double spectral_abscissa(const DenseMatrix& a) {
  require(a.rows() == a.cols() && a.rows() > 0, "spectral_abscissa: square nonempty matrix required");
  if (a.rows() <= 500) {
    Eigen::EigenSolver<DenseMatrix> solver(a, false);
    require(solver.info() == Eigen::Success, "spectral_abscissa: eigenvalue computation failed");
    return solver.eigenvalues().real().maxCoeff();
  }
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      require(i == j || a(i, j) >= 0.0, "spectral_abscissa: the large-N fallback needs a Metzler matrix");
    }
  }
  const double s = a.diagonal().cwiseAbs().maxCoeff();
  const DenseMatrix shifted = a + s * DenseMatrix::Identity(a.rows(), a.cols());
  DenseVector v = DenseVector::Ones(a.rows()) / std::sqrt(static_cast<double>(a.rows()));
  double rho = 0.0;
  for (int it = 0; it < 1000000; ++it) {
    DenseVector w = shifted * v;
    const double next = w.norm();
    if (next == 0.0) return -s;
    v = w / next;
    if (std::abs(next - rho) <= 1e-12 * std::max(1.0, next)) {
      rho = next;
      break;
    }
    rho = next;
  }
  return rho - s;
}

struct StabilityResult {
  bool condition_holds = false;  // sum_i μ̄_i β_i < 0
  double mu_beta = 0.0;
  std::vector<double> mu;
  double p_prime = 0.0;
  double abscissa = 0.0;  // of Q̄ + p'·diag(β)

  std::string status() const { return condition_holds ? "ok" : "condition violated"; }
};

inline double shifted_abscissa(const RateMatrix& q_bar, std::span<const double> beta, double p) {
  DenseMatrix a = q_bar.to_dense();
  for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, i) += p * beta[static_cast<std::size_t>(i)];
  return spectral_abscissa(a);
}

/// Largest p' in (0, p_max] with abscissa(Q̄ + p'·diag(β)) < 0, by bisection
/// to 1e-6. The abscissa is convex in p, vanishes at 0 and has slope
/// sum μ̄β there, so the admissible set is an interval starting at 0.
inline StabilityResult stability_exponent(const RateMatrix& q_bar, std::span<const double> beta, double p_max) {
  require(beta.size() == q_bar.size(), "stability_exponent: beta needs one entry per state");
  require(p_max > 0.0 && p_max <= 1.0, "stability_exponent: p_max must lie in (0, 1]");
  for (double b : beta) require(std::isfinite(b), "stability_exponent: beta must be finite");
  require(is_irreducible(q_bar), "stability_exponent: q_bar is reducible");
  StabilityResult out;
  const ProbabilityVector mu = invariant_measure(q_bar);
  out.mu = mu.weights();
  CompensatedSum s;
  for (std::size_t i = 0; i < beta.size(); ++i) s.add(mu[i] * beta[i]);
  out.mu_beta = s.value();
  out.condition_holds = out.mu_beta < 0.0;
  if (!out.condition_holds) return out;

  auto f = [&](double p) { return shifted_abscissa(q_bar, beta, p); };
  const double at_max = f(p_max);
  if (at_max < 0.0) {
    out.p_prime = p_max;
    out.abscissa = at_max;
    return out;
  }
  double lo = 0.0, hi = p_max, f_lo = 0.0;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm < 0.0) {
      lo = mid;
      f_lo = fm;
    } else {
      hi = mid;
    }
  }
  if (lo == 0.0) throw InternalError("stability_exponent: no admissible p' resolved above 1e-6");
  out.p_prime = lo;
  out.abscissa = f_lo;
  return out;
}

}  // namespace switchbound
