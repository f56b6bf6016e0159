#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "switchbound/bounds.hpp"
#include "switchbound/clocks.hpp"
#include "switchbound/estimators.hpp"
#include "switchbound/parallel.hpp"
#include "switchbound/rate_matrix.hpp"
#include "switchbound/scenario.hpp"
#include "switchbound/semigroup.hpp"
#include "switchbound/sim.hpp"
#include "switchbound/state_dependent.hpp"

namespace switchbound {

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
  std::optional<std::filesystem::path> out_dir;
  std::size_t workers = default_workers();
};

struct Assertion {
  std::string name;
  bool pass = false;
  std::string detail;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitAssertion = 1;
inline constexpr int kExitSchema = 2;

struct RunResult {
  int exit_code = kExitOk;
  std::string report;
  std::vector<Assertion> assertions;
  std::vector<std::filesystem::path> artifacts;
};

namespace detail {

/// Every number in CSVs and reports goes through here: 12 significant digits.
inline std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(12) << v;
  return s.str();
}

inline std::string matrix_text(const DenseMatrix& m, const std::string& indent = "  ") {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out += indent;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ' ';
      std::string cell = num(m(i, j) == 0.0 ? 0.0 : m(i, j));
      out += std::string(cell.size() < 10 ? 10 - cell.size() : 0, ' ') + cell;
    }
    out += '\n';
  }
  return out;
}

inline std::string vector_text(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : " ") + num(x);
  return out;
}

class Report {
 public:
  void line(const std::string& s = "") { text_ += s + '\n'; }
  void block(const std::string& s) { text_ += s; }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

struct Context {
  const Scenario& sc;
  std::uint64_t seed;
  std::size_t replicas;
  std::filesystem::path out_dir;
  std::size_t workers;
  Report report;
  RunResult result;

  StreamSpec stream() const { return StreamSpec{seed, {fnv1a(sc.name), 0, kGlobalClockBlock}}; }

  void check(const std::string& name, bool pass, const std::string& detail) { result.assertions.push_back({name, pass, detail}); }

  void write(const std::string& file, const std::string& content) {
    std::filesystem::create_directories(out_dir);
    const auto path = out_dir / file;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << content;
    result.artifacts.push_back(path);
  }
};

inline std::vector<double> default_grid(const Scenario& sc) {
  if (!sc.t_grid.empty()) return sc.t_grid;
  std::vector<double> g;
  for (int k = 0; k <= 10; ++k) g.push_back(sc.horizon * k / 10.0);
  return g;
}

inline void validation_failure(const std::string& what, const ValidationReport& v) {
  if (!v.empty()) throw ConfigError(what, describe(v));
}

inline RateMatrix table_generator(const DenseMatrix& table, const std::string& what) {
  validation_failure(what, validate(table));
  return RateMatrix::from_off_diagonal(table);
}

/// c0 and K0 from the config, else the smallest values both generators fit.
inline std::pair<std::size_t, double> block_parameters(const Scenario& sc, const RateMatrix& q, const RateMatrix& qt) {
  const BlockGeometry a = default_block_geometry(q), b = default_block_geometry(qt);
  return {sc.c0.value_or(std::max(a.c0, b.c0)), sc.k0.value_or(std::max(a.k0, b.k0))};
}

inline void header(Context& ctx) {
  const Scenario& sc = ctx.sc;
  ctx.report.line("scenario " + sc.name + " (kind " + to_string(sc.kind) + ")");
  ctx.report.line("seed " + std::to_string(ctx.seed) + ", replicas " + std::to_string(ctx.replicas) + ", stream algorithm " +
                  kStreamAlgorithm);
  ctx.report.line("states are numbered from 1");
  ctx.report.line();
}

struct BundleSummary {
  OrderReport order;
  std::vector<State> star, lambda, bar;  // at each grid time
  std::vector<double> x_abs;             // |X_t| at each grid time
  bool diverged = false;
  std::size_t events = 0;
};

inline BundleSummary summarize(const ComparisonBundle& b, const std::vector<double>& grid) {
  BundleSummary s;
  s.order = order_violations(std::span<const ComparisonBundle>(&b, 1), 4);
  s.diverged = b.diverged;
  s.events = b.events;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    s.star.push_back(b.star.state_at(grid[k]));
    s.lambda.push_back(b.lambda.state_at(grid[k]));
    s.bar.push_back(b.bar.state_at(grid[k]));
    if (!b.diverged) {
      const auto& ts = b.diffusion.times;
      auto it = std::upper_bound(ts.begin(), ts.end(), grid[k] + 1e-12);
      const auto x = b.diffusion.at(static_cast<std::size_t>(std::prev(it) - ts.begin()));
      double n2 = 0.0;
      for (double v : x) n2 += v * v;
      s.x_abs.push_back(std::sqrt(n2));
    }
  }
  return s;
}

struct BundleEnsemble {
  std::vector<BundleSummary> replicas;
  std::size_t violations = 0;
  std::size_t epochs = 0;
  std::size_t divergent = 0;
  std::vector<OrderViolation> details;
};

inline BundleEnsemble run_bundles(Context& ctx, const ComparisonSetup& setup, State i0, const std::vector<double>& x0,
                                  const std::vector<double>& grid) {
  const Scenario& sc = ctx.sc;
  BundleOptions opts;
  opts.recording = Recording::observations;
  opts.observe = grid;
  const StreamSpec base = ctx.stream();
  BundleEnsemble ens;
  ens.replicas = parallel_map(ctx.replicas, ctx.workers, [&](std::size_t r) {
    return summarize(simulate_comparison_bundle(setup, x0, i0, sc.horizon, sc.dt, base.with_replica(r), opts), grid);
  });
  for (std::size_t r = 0; r < ens.replicas.size(); ++r) {
    const auto& s = ens.replicas[r];
    ens.violations += s.order.count;
    ens.epochs += s.order.checked_epochs;
    if (s.diverged) ++ens.divergent;
    for (auto v : s.order.violations) {
      if (ens.details.size() >= 16) break;
      v.replica = r;
      ens.details.push_back(v);
    }
  }
  if (sc.dump_paths > 0) {
    std::ostringstream dump;
    BundleOptions full;
    full.recording = Recording::full;
    for (std::size_t r = 0; r < std::min(sc.dump_paths, ctx.replicas); ++r) {
      dump << "# replica " << r + 1 << '\n';
      dump_bundle(dump, simulate_comparison_bundle(setup, x0, i0, sc.horizon, sc.dt, base.with_replica(r), full));
      dump << '\n';
    }
    ctx.write("paths.txt", dump.str());
  }
  return ens;
}

/// Mean of |X_t|^p over the non-divergent replicas at grid index k.
inline EstimateWithCI moment_at(const BundleEnsemble& ens, std::size_t k, double p) {
  std::vector<double> v;
  for (const auto& s : ens.replicas) {
    if (!s.diverged) v.push_back(std::pow(s.x_abs[k], p));
  }
  if (v.empty()) return {std::nan(""), std::nan(""), 0, "moment"};
  return mean_with_se(v, "moment");
}

inline void report_order(Context& ctx, const BundleEnsemble& ens) {
  ctx.report.line("order violations (star <= lambda <= bar at every jump epoch and t=0): " + std::to_string(ens.violations) +
                  " over " + std::to_string(ens.epochs) + " checked epochs");
  for (const auto& v : ens.details) {
    ctx.report.line("  replica " + std::to_string(v.replica + 1) + " t=" + num(v.time) + ": star=" + std::to_string(v.star + 1) +
                    " lambda=" + std::to_string(v.lambda + 1) + " bar=" + std::to_string(v.bar + 1));
  }
  ctx.report.line("divergent replicas (non-finite X, excluded from moments): " + std::to_string(ens.divergent));
  ctx.check("order", ens.violations == 0, std::to_string(ens.violations) + " violations");
  ctx.check("divergence", static_cast<double>(ens.divergent) <= 0.01 * static_cast<double>(ens.replicas.size()),
            std::to_string(ens.divergent) + " of " + std::to_string(ens.replicas.size()) + " replicas diverged (limit 1%)");
}

inline void report_envelopes(Context& ctx, const EnvelopePair& env) {
  ctx.report.line("lower envelope q_star (" +
                  std::string(env.provenance == EnvelopePair::Provenance::closed_form ? "closed-form ranges" : "grid ranges") + ")");
  ctx.report.block(matrix_text(env.q_star.to_dense()));
  ctx.report.line("upper envelope q_bar");
  ctx.report.block(matrix_text(env.q_bar.to_dense()));
  if (is_irreducible(env.q_bar)) {
    ctx.report.line("invariant measure of q_bar (mu_bar): " + vector_text(invariant_measure(env.q_bar).weights()));
  } else {
    ctx.report.line("q_bar is reducible; mu_bar undefined");
  }
}

inline void run_comparison(Context& ctx) {
  const Scenario& sc = ctx.sc;
  const StateDependentRateSpec spec = rate_spec(sc.rates);
  validation_failure("[rates]", validate(spec));
  const EnvelopePair env = envelope_matrices(spec);
  const DiffusionSpec dspec = diffusion_spec(*sc.diffusion);
  const ComparisonSetup setup = prepare_comparison(spec, env, dspec);
  const auto grid = default_grid(sc);

  header(ctx);
  ctx.report.line("horizon " + num(sc.horizon) + ", dt " + num(sc.dt) + ", initial state " + std::to_string(sc.i0 + 1) +
                  ", x0 " + vector_text(sc.diffusion->x0));
  ctx.report.line("diffusion: dX = b_i X dt + sigma_i X dB with b = (" + vector_text(sc.diffusion->drift) + "), sigma = (" +
                  vector_text(sc.diffusion->volatility) + ")");
  report_envelopes(ctx, env);
  ctx.report.line("mark window half-width K_mark " + num(setup.k_mark) + " (global clock rate " + num(setup.window.measure()) + ")");
  ctx.report.line();

  const BundleEnsemble ens = run_bundles(ctx, setup, sc.i0, sc.diffusion->x0, grid);
  std::ostringstream csv;
  csv << "t,mean_star,mean_lambda,mean_bar,moment,moment_se\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CompensatedSum s, l, b;
    for (const auto& r : ens.replicas) {
      s.add(static_cast<double>(r.star[k] + 1));
      l.add(static_cast<double>(r.lambda[k] + 1));
      b.add(static_cast<double>(r.bar[k] + 1));
    }
    const double n = static_cast<double>(ens.replicas.size());
    const EstimateWithCI m = moment_at(ens, k, sc.moment_power);
    csv << num(grid[k]) << ',' << num(s.value() / n) << ',' << num(l.value() / n) << ',' << num(b.value() / n) << ','
        << num(m.estimate) << ',' << num(m.se) << '\n';
  }
  ctx.write("comparison.csv", csv.str());
  ctx.report.line("comparison.csv: mean 1-based states of star, lambda, bar and E|X_t|^" + num(sc.moment_power) +
                  " with its standard error, per grid time");
  report_order(ctx, ens);
}

inline void run_stability(Context& ctx) {
  const Scenario& sc = ctx.sc;
  const StateDependentRateSpec spec = rate_spec(sc.rates);
  validation_failure("[rates]", validate(spec));
  header(ctx);

  const EnvelopePair given = envelope_matrices(spec);
  ctx.report.line("beta (given state order): " + vector_text(sc.beta));
  ctx.report.line("upper envelope q_bar in the given state order");
  ctx.report.block(matrix_text(given.q_bar.to_dense()));
  if (is_irreducible(given.q_bar)) {
    const auto mu = invariant_measure(given.q_bar).weights();
    CompensatedSum s;
    for (std::size_t i = 0; i < mu.size(); ++i) s.add(mu[i] * sc.beta[i]);
    ctx.report.line("mu_bar " + vector_text(mu) + ", sum mu_bar*beta " + num(s.value()));
  }

  // The comparison argument needs beta nondecreasing along the state order.
  ReorderedSpec rs;
  if (sc.reorder) {
    rs = reorder_by_beta(spec, sc.beta);
  } else {
    rs.spec = spec;
    rs.beta = sc.beta;
    rs.permutation.resize(sc.beta.size());
    std::iota(rs.permutation.begin(), rs.permutation.end(), State{0});
  }
  std::vector<double> perm1;
  for (State p : rs.permutation) perm1.push_back(static_cast<double>(p + 1));
  if (sc.reorder) {
    ctx.report.line("states reordered by beta: new state k is given state " + vector_text(perm1));
  } else if (!std::is_sorted(rs.beta.begin(), rs.beta.end())) {
    ctx.report.line("reorder = false and beta is not nondecreasing: the comparison argument does not cover this order,");
    ctx.report.line("so the moment check below is an empirical observation only");
  }
  const EnvelopePair env = envelope_matrices(rs.spec);
  report_envelopes(ctx, env);
  const StabilityResult st = stability_exponent(env.q_bar, rs.beta, sc.p_max);
  ctx.report.line("sum mu_bar*beta in the state order used: " + num(st.mu_beta) + " (" + st.status() + ")");
  ctx.check("mu_bar-beta", st.condition_holds, "sum mu_bar*beta = " + num(st.mu_beta));
  if (!st.condition_holds) return;
  ctx.report.line("stability exponent p' " + num(st.p_prime) + " (largest in (0, " + num(sc.p_max) +
                  "] to 1e-6), spectral abscissa of q_bar + p'*diag(beta) " + num(st.abscissa));
  ctx.check("abscissa", st.abscissa < 0.0, "abscissa " + num(st.abscissa));

  DiffusionConfig d = *sc.diffusion;
  DiffusionConfig dr = d;
  State i0 = 0;
  for (State a = 0; a < rs.permutation.size(); ++a) {
    dr.drift[a] = d.drift[rs.permutation[a]];
    dr.volatility[a] = d.volatility[rs.permutation[a]];
    if (rs.permutation[a] == sc.i0) i0 = a;
  }
  const DiffusionSpec dspec = diffusion_spec(dr);
  const ComparisonSetup setup = prepare_comparison(rs.spec, env, dspec);
  auto grid = default_grid(sc);
  if (grid.front() != 0.0) grid.insert(grid.begin(), 0.0);
  ctx.report.line();

  const BundleEnsemble ens = run_bundles(ctx, setup, i0, d.x0, grid);
  std::ostringstream csv;
  csv << "t,moment,se\n";
  std::vector<double> means;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const EstimateWithCI m = moment_at(ens, k, st.p_prime);
    means.push_back(m.estimate);
    csv << num(grid[k]) << ',' << num(m.estimate) << ',' << num(m.se) << '\n';
  }
  ctx.write("stability.csv", csv.str());
  ctx.report.line("stability.csv: E|X_t|^p' with its standard error, per grid time");
  report_order(ctx, ens);
  const double ratio = means.back() / means.front();
  ctx.report.line("moment ratio E|X_T|^p' / E|X_0|^p' at T=" + num(grid.back()) + ": " + num(ratio));
  ctx.check("moment-decay", ratio < 0.1, "ratio " + num(ratio) + " (limit 0.1)");
}

inline void sandwich_checks(Context& ctx, double t, double exact, const ThetaBounds& b) {
  const bool ok = b.lower_h3 <= exact && exact <= b.upper_h2 && exact <= b.upper_h25;
  ctx.check("sandwich t=" + num(t), ok,
            "lower_h3 " + num(b.lower_h3) + " <= exact " + num(exact) + " <= upper_h2 " + num(b.upper_h2) + ", upper_h25 " +
                num(b.upper_h25));
}

inline void pair_header(Context& ctx, const RateMatrix& q, const RateMatrix& qt, std::size_t c0, double k0) {
  header(ctx);
  ctx.report.line("generator q");
  ctx.report.block(matrix_text(q.to_dense()));
  ctx.report.line("perturbed generator q~");
  ctx.report.block(matrix_text(qt.to_dense()));
  ctx.report.line("block parameters c0 " + std::to_string(c0) + ", K0 " + num(k0) + "; initial state " + std::to_string(ctx.sc.i0 + 1));
  ctx.report.line("delta = ||q - q~|| (max absolute row sum) " + num(l1_diff_norm(q, qt)) +
                  ", r = min_i sum_{j!=i} |q_ij - q~_ij| " + num(min_offdiag_diff(q, qt)) + ", M = 4 c0 K0 " +
                  num(4.0 * static_cast<double>(c0) * k0));
}

inline void report_mitrophanov(Context& ctx, const RateMatrix& q, const RateMatrix& qt) {
  const MitrophanovBound mb = mitrophanov_bound(q, qt);
  ctx.report.line("ergodicity time tau1 of q " + num(mb.tau1) + "; sup_t ||P_t - P~_t|| <= e*tau1/(e-1) * delta = " +
                  num(mb.coefficient) + " * " + num(mb.delta) + " = " + num(mb.bound));
}

inline void run_perturbation(Context& ctx) {
  const Scenario& sc = ctx.sc;
  const RateMatrix q = table_generator(sc.rates.table, "[rates]");
  const RateMatrix qt = table_generator(*sc.perturbed, "[perturbed]");
  const auto [c0, k0] = block_parameters(sc, q, qt);
  require_block_hypotheses(q, c0, k0, "[rates]");
  require_block_hypotheses(qt, c0, k0, "[perturbed]");
  pair_header(ctx, q, qt, c0, k0);
  report_mitrophanov(ctx, q, qt);
  ctx.report.line();

  const auto& grid = sc.t_grid;
  const double horizon = grid.back();
  const IntervalLayout a = build_block_layout(q, c0, k0), b = build_block_layout(qt, c0, k0);
  const StreamSpec base = ctx.stream();
  const auto per_replica = parallel_map(ctx.replicas, ctx.workers, [&](std::size_t r) {
    const PerturbationPair p = simulate_perturbation_pair(a, b, sc.i0, horizon, base.with_replica(r));
    std::vector<double> v;
    for (double t : grid) v.push_back(disagreement_time(p.first, p.second, t) / t);
    return v;
  });

  std::ostringstream csv;
  csv << "t,theta_hat,se,exact,lower_h3,upper_h2,upper_h25\n";
  const bool have_exact = q.size() <= 60;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::vector<double> v;
    v.reserve(per_replica.size());
    for (const auto& r : per_replica) v.push_back(r[k]);
    const EstimateWithCI e = mean_with_se(v, "theta-sweep");
    const ThetaBounds tb = theta_bounds(q, qt, c0, k0, grid[k]);
    const double exact = have_exact ? exact_theta(q, qt, sc.i0, grid[k]) : std::nan("");
    csv << num(grid[k]) << ',' << num(e.estimate) << ',' << num(e.se) << ',' << num(exact) << ',' << num(tb.lower_h3) << ','
        << num(tb.upper_h2) << ',' << num(tb.upper_h25) << '\n';
    ctx.report.line("t=" + num(grid[k]) + ": theta_hat " + num(e.estimate) + " (se " + num(e.se) + "), exact " + num(exact) +
                    ", lower_h3 " + num(tb.lower_h3) + ", upper_h2 " + num(tb.upper_h2) + ", upper_h25 " + num(tb.upper_h25));
    if (have_exact) {
      sandwich_checks(ctx, grid[k], exact, tb);
      if (ctx.replicas >= 2) {
        ctx.check("oracle t=" + num(grid[k]), std::abs(e.estimate - exact) <= 3.0 * e.se || e.se == 0.0 && e.estimate == exact,
                  "|theta_hat - exact| = " + num(std::abs(e.estimate - exact)) + ", 3 se = " + num(3.0 * e.se));
      }
    }
  }
  ctx.write("theta.csv", csv.str());
  ctx.report.line("theta.csv: Monte Carlo and exact disagreement functional next to the closed-form bounds, per t");
}

inline void run_bounds_sweep(Context& ctx) {
  const Scenario& sc = ctx.sc;
  const RateMatrix q = table_generator(sc.rates.table, "[rates]");
  const RateMatrix qt = table_generator(*sc.perturbed, "[perturbed]");
  const auto [c0, k0] = block_parameters(sc, q, qt);
  require_block_hypotheses(q, c0, k0, "[rates]");
  require_block_hypotheses(qt, c0, k0, "[perturbed]");
  pair_header(ctx, q, qt, c0, k0);
  report_mitrophanov(ctx, q, qt);
  ctx.report.line();

  std::ostringstream csv;
  csv << "t,delta,r,M,lower_h3,upper_h2,upper_h25,legacy_d8,exact\n";
  const bool have_exact = q.size() <= 60;
  for (double t : sc.t_grid) {
    const ThetaBounds tb = theta_bounds(q, qt, c0, k0, t);
    const double exact = have_exact ? exact_theta(q, qt, sc.i0, t) : std::nan("");
    csv << num(t) << ',' << num(tb.delta) << ',' << num(tb.r) << ',' << num(tb.m) << ',' << num(tb.lower_h3) << ','
        << num(tb.upper_h2) << ',' << num(tb.upper_h25) << ',' << num(tb.legacy_d8) << ',' << num(exact) << '\n';
    ctx.report.line("t=" + num(t) + ": lower_h3 " + num(tb.lower_h3) + ", exact " + num(exact) + ", upper_h2 " +
                    num(tb.upper_h2) + ", upper_h25 " + num(tb.upper_h25) + ", legacy N^2 t delta " + num(tb.legacy_d8));
    if (have_exact) sandwich_checks(ctx, t, exact, tb);
  }
  ctx.write("bounds.csv", csv.str());
  ctx.report.line("bounds.csv: closed-form bounds and the exact disagreement functional, per t");
}

}  // namespace detail

/// Validation of every rate source in the scenario. Returns the violations
/// as "[section]: message" lines; empty means valid.
inline std::vector<std::string> validate_scenario(const Scenario& sc) {
  std::vector<std::string> problems;
  auto add = [&](const std::string& where, const ValidationReport& r) {
    for (const auto& v : r) problems.push_back(where + ": " + v.message);
  };
  if (sc.rates.source == RatesConfig::Source::table) {
    add("[rates]", validate(sc.rates.table, sc.c0, std::nullopt));
  } else {
    add("[rates]", validate(rate_spec(sc.rates)));
  }
  if (sc.perturbed) add("[perturbed]", validate(*sc.perturbed, sc.c0, std::nullopt));
  return problems;
}

inline RunResult run_scenario(const Scenario& sc, const RunOverrides& overrides = {}) {
  detail::Context ctx{sc, overrides.seed.value_or(sc.seed), overrides.replicas.value_or(sc.replicas),
                      overrides.out_dir.value_or(sc.out_dir), std::max<std::size_t>(overrides.workers, 1), {}, {}};
  try {
    switch (sc.kind) {
      case ScenarioKind::validate: {
        detail::header(ctx);
        const auto problems = validate_scenario(sc);
        for (const auto& p : problems) ctx.report.line(p);
        if (!problems.empty()) {
          ctx.result.exit_code = kExitSchema;
          ctx.result.report = ctx.report.text();
          return ctx.result;
        }
        ctx.report.line("valid");
        break;
      }
      case ScenarioKind::comparison: detail::run_comparison(ctx); break;
      case ScenarioKind::stability: detail::run_stability(ctx); break;
      case ScenarioKind::perturbation: detail::run_perturbation(ctx); break;
      case ScenarioKind::bounds_sweep: detail::run_bounds_sweep(ctx); break;
    }
  } catch (const InputError& e) {
    ctx.report.line(std::string("error: ") + e.what());
    ctx.result.exit_code = kExitSchema;
    ctx.result.report = ctx.report.text();
    return ctx.result;
  }
  if (!ctx.result.assertions.empty()) {
    ctx.report.line();
    ctx.report.line("assertions");
  }
  bool all = true;
  for (const auto& a : ctx.result.assertions) {
    ctx.report.line(std::string(a.pass ? "  PASS " : "  FAIL ") + a.name + ": " + a.detail);
    all = all && a.pass;
  }
  ctx.result.exit_code = all ? kExitOk : kExitAssertion;
  if (sc.kind != ScenarioKind::validate) ctx.write("report.txt", ctx.report.text());
  ctx.result.report = ctx.report.text();
  return ctx.result;
}

}  // namespace switchbound
