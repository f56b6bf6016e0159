#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "switchbound/common.hpp"
#include "switchbound/rate_matrix.hpp"
#include "switchbound/sim.hpp"
#include "switchbound/state_dependent.hpp"

namespace switchbound {

/// Config problem with the offending location: "line N" for syntax errors,
/// "[section] key" for field errors.
class ConfigError : public InputError {
 public:
  ConfigError(const std::string& where, const std::string& what) : InputError(where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

enum class ScenarioKind { comparison, perturbation, stability, bounds_sweep, validate };

inline const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::comparison: return "comparison";
    case ScenarioKind::perturbation: return "perturbation";
    case ScenarioKind::stability: return "stability";
    case ScenarioKind::bounds_sweep: return "bounds-sweep";
    case ScenarioKind::validate: return "validate";
  }
  return "?";
}

/// Either the built-in family base + scale·|i-j|·min(|x|², 1) or a constant
/// generator table (full matrix with its diagonal).
struct RatesConfig {
  enum class Source { family, table };
  Source source = Source::table;
  std::size_t states = 0;
  double base = 1.0;
  double scale = 1.0;
  DenseMatrix table;
};

struct DiffusionConfig {
  std::string model = "linear";
  std::vector<double> drift;
  std::vector<double> volatility;
  std::vector<double> x0{1.0};
};

struct Scenario {
  std::string name;
  ScenarioKind kind = ScenarioKind::comparison;
  std::filesystem::path source;

  RatesConfig rates;
  std::optional<DenseMatrix> perturbed;
  std::optional<DiffusionConfig> diffusion;

  double horizon = 1.0;
  double dt = 1e-3;
  std::size_t replicas = 1000;
  std::uint64_t seed = 1;
  State i0 = 0;
  std::vector<double> t_grid;
  std::optional<std::size_t> c0;
  std::optional<double> k0;
  std::vector<double> beta;
  double p_max = 1.0;
  bool reorder = true;
  double moment_power = 2.0;
  std::size_t dump_paths = 0;
  std::filesystem::path out_dir = "out";
};

/// 64-bit FNV-1a; the scenario component of every stream id.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

using boost::property_tree::ptree;

inline std::vector<double> parse_numbers(const std::string& text, const std::string& where) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw ConfigError(where, "expected a number, got '" + tok + "'");
    }
    if (used != tok.size() || !std::isfinite(v)) throw ConfigError(where, "expected a finite number, got '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

/// "a b; c d" -> 2x2 matrix, rows separated by ';'.
inline DenseMatrix parse_table(const std::string& text, const std::string& where) {
  std::vector<std::vector<double>> rows;
  std::string row;
  std::istringstream in(text);
  while (std::getline(in, row, ';')) rows.push_back(parse_numbers(row, where));
  if (rows.empty() || rows.front().empty()) throw ConfigError(where, "empty table");
  const std::size_t n = rows.size();
  DenseMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) {
      throw ConfigError(where, "row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) + " entries, expected " +
                                   std::to_string(n));
    }
    for (std::size_t j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

/// Reads a "N c" matrix file and returns its full conservative table.
inline DenseMatrix load_matrix_file(const std::filesystem::path& path, const std::string& where) {
  std::ifstream in(path);
  if (!in) throw ConfigError(where, "cannot open matrix file " + path.string());
  try {
    return read_rate_matrix(in).to_dense();
  } catch (const InputError& e) {
    throw ConfigError(where, e.what());
  }
}

class Section {
 public:
  Section(const ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  bool present() const { return tree_ != nullptr; }
  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }
  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

  std::optional<std::string> text(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    return tree_->find(key)->second.data();
  }
  std::string required(const std::string& key) {
    auto v = text(key);
    if (!v || v->empty()) throw ConfigError(where(key), "required field missing");
    return *v;
  }
  std::optional<double> number(const std::string& key) {
    auto v = text(key);
    if (!v) return std::nullopt;
    auto xs = parse_numbers(*v, where(key));
    if (xs.size() != 1) throw ConfigError(where(key), "expected one number");
    return xs.front();
  }
  std::optional<std::uint64_t> count(const std::string& key) {
    auto v = text(key);
    if (!v) return std::nullopt;
    return parse_count(*v, where(key));
  }
  std::optional<std::vector<double>> list(const std::string& key) {
    auto v = text(key);
    if (!v) return std::nullopt;
    return parse_numbers(*v, where(key));
  }

  void reject_unknown() const {
    if (!tree_) return;
    for (const auto& [key, value] : *tree_) {
      if (!used_.count(key)) throw ConfigError(where(key), "unknown field");
    }
  }

  static std::uint64_t parse_count(const std::string& v, const std::string& where) {
    std::size_t used = 0;
    unsigned long long x = 0;
    try {
      if (!v.empty() && v.front() == '-') throw std::invalid_argument("negative");
      x = std::stoull(v, &used, 10);
    } catch (const std::exception&) {
      throw ConfigError(where, "expected a nonnegative integer, got '" + v + "'");
    }
    if (used != v.size()) throw ConfigError(where, "expected a nonnegative integer, got '" + v + "'");
    return x;
  }

 private:
  const ptree* tree_;
  std::string name_;
  std::set<std::string> used_;
};

inline Section section(const ptree& root, const std::string& name) {
  auto it = root.find(name);
  return Section(it == root.not_found() ? nullptr : &it->second, name);
}

inline DenseMatrix read_table_section(Section& s, const std::filesystem::path& base_dir) {
  const bool has_table = s.has("table"), has_file = s.has("matrix_file");
  if (has_table == has_file) throw ConfigError(s.where("table"), "give exactly one of table or matrix_file");
  if (has_table) return parse_table(*s.text("table"), s.where("table"));
  s.text("table");
  const std::filesystem::path p = base_dir / *s.text("matrix_file");
  return load_matrix_file(p, s.where("matrix_file"));
}

}  // namespace detail

/// Parses an INI scenario. Unknown sections or fields are errors, so typos
/// never fall back to defaults silently.
inline Scenario parse_scenario(std::istream& in, const std::filesystem::path& source = {}) {
  using detail::ptree;
  ptree root;
  try {
    boost::property_tree::read_ini(in, root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), e.message());
  }
  const std::set<std::string> known{"scenario", "rates", "perturbed", "diffusion", "run", "output"};
  for (const auto& [name, tree] : root) {
    if (tree.empty() && !tree.data().empty()) throw ConfigError(name, "field outside any section");
    if (!known.count(name)) throw ConfigError("[" + name + "]", "unknown section");
  }
  const std::filesystem::path base_dir = source.empty() ? std::filesystem::path(".") : source.parent_path();

  Scenario sc;
  sc.source = source;
  auto head = detail::section(root, "scenario");
  if (!head.present()) throw ConfigError("[scenario]", "required section missing");
  sc.name = head.required("name");
  const std::string kind = head.required("kind");
  const std::map<std::string, ScenarioKind> kinds{{"comparison", ScenarioKind::comparison},
                                                  {"perturbation", ScenarioKind::perturbation},
                                                  {"stability", ScenarioKind::stability},
                                                  {"bounds-sweep", ScenarioKind::bounds_sweep},
                                                  {"validate", ScenarioKind::validate}};
  auto k = kinds.find(kind);
  if (k == kinds.end()) throw ConfigError(head.where("kind"), "unknown kind '" + kind + "'");
  sc.kind = k->second;
  head.reject_unknown();

  auto rates = detail::section(root, "rates");
  if (!rates.present()) throw ConfigError("[rates]", "required section missing");
  if (auto fam = rates.text("family")) {
    if (*fam != "distance-saturation") throw ConfigError(rates.where("family"), "unknown family '" + *fam + "'");
    sc.rates.source = RatesConfig::Source::family;
    const auto n = rates.count("states");
    if (!n || *n < 2) throw ConfigError(rates.where("states"), "the family needs states >= 2");
    sc.rates.states = static_cast<std::size_t>(*n);
    sc.rates.base = rates.number("base").value_or(1.0);
    sc.rates.scale = rates.number("scale").value_or(1.0);
    if (sc.rates.base < 0.0 || sc.rates.scale < 0.0) throw ConfigError(rates.where("base"), "base and scale must be nonnegative");
  } else {
    sc.rates.source = RatesConfig::Source::table;
    sc.rates.table = detail::read_table_section(rates, base_dir);
    sc.rates.states = static_cast<std::size_t>(sc.rates.table.rows());
  }
  rates.reject_unknown();

  auto pert = detail::section(root, "perturbed");
  if (pert.present()) {
    sc.perturbed = detail::read_table_section(pert, base_dir);
    pert.reject_unknown();
    if (sc.perturbed->rows() != static_cast<Eigen::Index>(sc.rates.states)) {
      throw ConfigError("[perturbed] table", "dimension differs from [rates]");
    }
  }

  auto diff = detail::section(root, "diffusion");
  if (diff.present()) {
    DiffusionConfig d;
    d.model = diff.text("model").value_or("linear");
    if (d.model != "linear") throw ConfigError(diff.where("model"), "only the linear model is available");
    auto drift = diff.list("drift");
    if (!drift) throw ConfigError(diff.where("drift"), "required field missing");
    auto vol = diff.list("volatility");
    if (!vol) throw ConfigError(diff.where("volatility"), "required field missing");
    d.drift = *drift;
    d.volatility = *vol;
    if (auto x0 = diff.list("x0")) d.x0 = *x0;
    if (d.drift.size() != sc.rates.states) throw ConfigError(diff.where("drift"), "needs one entry per state");
    if (d.volatility.size() != sc.rates.states) throw ConfigError(diff.where("volatility"), "needs one entry per state");
    if (d.x0.size() != 1) throw ConfigError(diff.where("x0"), "the linear model is one-dimensional");
    sc.diffusion = d;
    diff.reject_unknown();
  }

  auto run = detail::section(root, "run");
  if (run.present()) {
    sc.horizon = run.number("horizon").value_or(sc.horizon);
    sc.dt = run.number("dt").value_or(sc.dt);
    sc.replicas = run.count("replicas").value_or(sc.replicas);
    sc.seed = run.count("seed").value_or(sc.seed);
    if (auto i0 = run.count("i0")) {
      if (*i0 < 1 || *i0 > sc.rates.states) throw ConfigError(run.where("i0"), "must lie in 1.." + std::to_string(sc.rates.states));
      sc.i0 = static_cast<State>(*i0 - 1);
    }
    if (auto g = run.list("t_grid")) sc.t_grid = *g;
    if (auto c0 = run.count("c0")) sc.c0 = static_cast<std::size_t>(*c0);
    sc.k0 = run.number("K0");
    if (auto b = run.list("beta")) sc.beta = *b;
    sc.p_max = run.number("p_max").value_or(sc.p_max);
    if (auto r = run.text("reorder")) {
      if (*r != "true" && *r != "false") throw ConfigError(run.where("reorder"), "expected true or false");
      sc.reorder = *r == "true";
    }
    sc.moment_power = run.number("moment_power").value_or(sc.moment_power);
    sc.dump_paths = run.count("dump_paths").value_or(0);
    run.reject_unknown();
  }
  auto out = detail::section(root, "output");
  if (out.present()) {
    if (auto dir = out.text("dir")) sc.out_dir = *dir;
    out.reject_unknown();
  }

  if (!(sc.horizon > 0.0)) throw ConfigError("[run] horizon", "must be positive");
  if (!(sc.dt > 0.0)) throw ConfigError("[run] dt", "must be positive");
  if (sc.replicas < 1) throw ConfigError("[run] replicas", "must be at least 1");
  if (!(sc.p_max > 0.0 && sc.p_max <= 1.0)) throw ConfigError("[run] p_max", "must lie in (0, 1]");
  if (!(sc.moment_power > 0.0)) throw ConfigError("[run] moment_power", "must be positive");
  if (sc.c0 && *sc.c0 < 1) throw ConfigError("[run] c0", "must be at least 1");
  if (sc.k0 && !(*sc.k0 > 0.0)) throw ConfigError("[run] K0", "must be positive");
  for (double t : sc.t_grid) {
    if (!(t >= 0.0)) throw ConfigError("[run] t_grid", "times must be nonnegative");
  }
  if (!std::is_sorted(sc.t_grid.begin(), sc.t_grid.end())) throw ConfigError("[run] t_grid", "times must be increasing");

  switch (sc.kind) {
    case ScenarioKind::comparison:
    case ScenarioKind::stability:
      if (!sc.diffusion) throw ConfigError("[diffusion]", "required for kind " + std::string(to_string(sc.kind)));
      for (double t : sc.t_grid) {
        if (t > sc.horizon) throw ConfigError("[run] t_grid", "times must not exceed the horizon");
      }
      if (sc.kind == ScenarioKind::stability && sc.beta.size() != sc.rates.states) {
        throw ConfigError("[run] beta", "needs one entry per state");
      }
      break;
    case ScenarioKind::perturbation:
    case ScenarioKind::bounds_sweep:
      if (sc.rates.source != RatesConfig::Source::table) throw ConfigError("[rates]", "kind needs a constant table");
      if (!sc.perturbed) throw ConfigError("[perturbed]", "required for kind " + std::string(to_string(sc.kind)));
      if (sc.t_grid.empty()) throw ConfigError("[run] t_grid", "required for kind " + std::string(to_string(sc.kind)));
      for (double t : sc.t_grid) {
        if (!(t > 0.0)) throw ConfigError("[run] t_grid", "times must be positive");
      }
      break;
    case ScenarioKind::validate: break;
  }
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config");
  return parse_scenario(in, path);
}

/// The state-dependent spec of a scenario; a table becomes constant rates.
inline StateDependentRateSpec rate_spec(const RatesConfig& rates) {
  if (rates.source == RatesConfig::Source::family) return distance_saturation_family(rates.states, rates.base, rates.scale);
  const RateMatrix q = generator_from_table(rates.table);
  StateDependentRateSpec spec;
  spec.n_states = q.size();
  spec.dim = 1;
  spec.bandwidth = q.bandwidth();
  spec.rate = [q](State i, State j, StatePoint) { return q.rate(i, j); };
  spec.envelope = [q](State i, State j) { return RateRange{q.rate(i, j), q.rate(i, j)}; };
  spec.k0 = std::max(q.max_exit_rate(), 1e-300);
  return spec;
}

inline DiffusionSpec diffusion_spec(const DiffusionConfig& d) { return linear_regime_diffusion(d.drift, d.volatility); }

}  // namespace switchbound
