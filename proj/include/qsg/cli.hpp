// Experiment driver behind the qsg command line tool: configuration, sweeps
// and table output. The sweep functions are also used by the acceptance suite.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qsg/analysis.hpp"
#include "qsg/cubature.hpp"
#include "qsg/grids.hpp"
#include "qsg/recovery.hpp"

namespace qsg::cli {

/// Invalid configuration; maps to exit code 2.
class ConfigError : public SpecError {
public:
  using SpecError::SpecError;
};

/// Failure while running an experiment; maps to exit code 3.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Raw key = value configuration with [sections]

struct RawEntry {
  std::string value;
  int line = 0;  // 0 for command-line overrides
};

using RawConfig = std::map<std::string, RawEntry>;

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "spec.p",           "spec.theta",         "spec.q",           "spec.r",           "spec.d",
      "spec.a",           "spec.alpha",         "spec.beta",        "spec.gamma",       "spec.tau",
      "spec.epsilon",     "grid.family",        "grid.budgets",     "grid.xi",          "grid.lambda",
      "run.functions",    "run.seed",           "run.kink_shifts",  "run.threads",      "error.lattice_extra",
      "error.max_lattice", "error.qmc_points",  "error.reference_offset", "output.path", "output.format",
      "output.plot"};
  return keys;
}

/// Parses `key = value` lines grouped under `[section]` headers; '#' starts a comment.
inline RawConfig parse_config_text(const std::string& text) {
  RawConfig raw;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = (section.empty() ? "" : section + ".") + trim(line.substr(0, eq));
    const auto& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (raw.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    raw[key] = {trim(line.substr(eq + 1)), lineno};
  }
  return raw;
}

inline RawConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// FNV-1a over the sorted effective key = value pairs.
inline std::string config_hash(const RawConfig& raw) {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& [k, v] : raw) {
    for (char c : k + "=" + v.value + "\n") {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Typed configuration

struct ExperimentConfig {
  SmoothnessSpec spec;
  Family family = Family::DeltaHybrid;
  std::vector<std::int64_t> budgets{100, 1000, 10000};
  std::vector<double> xis;
  std::optional<double> lambda;
  std::vector<std::string> functions{"poly", "sin", "kink"};
  std::uint64_t seed = 1;
  int kink_shifts = 16;
  unsigned threads = 0;
  ErrorOptions error;
  double reference_offset = 4.0;
  std::string output = "-";
  std::string format = "csv";
  std::string plot;
  std::string hash;
};

namespace detail {

inline std::string where(const std::string& key, const RawEntry& e) {
  return e.line > 0 ? "line " + std::to_string(e.line) + ": " + key : "option " + key;
}

inline double parse_real(const std::string& key, const RawEntry& e) {
  const std::string v = trim(e.value);
  if (v == "inf" || v == "infinity") return kInf;
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(where(key, e) + ": expected a number, got '" + v + "'");
  return x;
}

inline std::int64_t parse_int(const std::string& key, const RawEntry& e) {
  const double x = parse_real(key, e);
  if (!std::isfinite(x) || x != std::floor(x)) throw ConfigError(where(key, e) + ": expected an integer, got '" + e.value + "'");
  return static_cast<std::int64_t>(x);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<double> parse_reals(const std::string& key, const RawEntry& e) {
  std::vector<double> out;
  for (const auto& item : split_list(e.value)) out.push_back(parse_real(key, {item, e.line}));
  if (out.empty()) throw ConfigError(where(key, e) + ": expected a comma-separated list");
  return out;
}

}  // namespace detail

/// Converts raw entries into a validated configuration.
inline ExperimentConfig make_config(const RawConfig& raw) {
  using namespace detail;
  ExperimentConfig cfg;
  auto get = [&](const std::string& k) -> const RawEntry* {
    const auto it = raw.find(k);
    return it == raw.end() ? nullptr : &it->second;
  };
  auto real = [&](const std::string& k, double& out) {
    if (const auto* e = get(k)) out = parse_real(k, *e);
  };
  SmoothnessSpec& s = cfg.spec;
  real("spec.p", s.p);
  real("spec.theta", s.theta);
  real("spec.q", s.q);
  if (const auto* e = get("spec.r")) s.r = static_cast<int>(parse_int("spec.r", *e));
  if (const auto* e = get("spec.d")) s.d = static_cast<int>(parse_int("spec.d", *e));
  if (const auto* e = get("spec.a")) {
    if (get("spec.alpha") || get("spec.beta")) throw ConfigError(where("spec.a", *e) + ": give either a or alpha/beta");
    s.kind = MixedVector{parse_reals("spec.a", *e)};
  } else {
    Hybrid h{1.0, 0.5};
    real("spec.alpha", h.alpha);
    real("spec.beta", h.beta);
    s.kind = h;
  }
  if (const auto* e = get("spec.gamma")) s.gamma = parse_real("spec.gamma", *e);
  if (const auto* e = get("spec.tau")) s.tau = parse_real("spec.tau", *e);
  if (const auto* e = get("spec.epsilon")) s.epsilon = parse_real("spec.epsilon", *e);

  if (const auto* e = get("grid.family")) {
    try {
      cfg.family = family_from_string(e->value);
    } catch (const SpecError& err) {
      throw ConfigError(where("grid.family", *e) + ": " + err.what());
    }
  } else {
    cfg.family = !s.is_hybrid() ? Family::DeltaMixed : (s.gamma ? Family::DeltaEnergy : Family::DeltaHybrid);
  }
  if (cfg.family == Family::FullGrid || cfg.family == Family::Smolyak)
    throw ConfigError("grid.family must be hybrid, mixed or energy (comparison sets come from 'compare')");
  if (const auto* e = get("grid.budgets")) {
    cfg.budgets.clear();
    for (const auto& item : split_list(e->value)) {
      const auto n = parse_int("grid.budgets", {item, e->line});
      if (n <= 0) throw ConfigError(where("grid.budgets", *e) + ": budgets must be positive");
      cfg.budgets.push_back(n);
    }
    if (cfg.budgets.empty()) throw ConfigError(where("grid.budgets", *e) + ": expected a comma-separated list");
    std::sort(cfg.budgets.begin(), cfg.budgets.end());
  }
  if (const auto* e = get("grid.xi")) cfg.xis = parse_reals("grid.xi", *e);
  if (const auto* e = get("grid.lambda")) cfg.lambda = parse_real("grid.lambda", *e);
  if (const auto* e = get("run.functions")) cfg.functions = split_list(e->value);
  if (const auto* e = get("run.seed")) cfg.seed = static_cast<std::uint64_t>(parse_int("run.seed", *e));
  if (const auto* e = get("run.kink_shifts")) cfg.kink_shifts = static_cast<int>(parse_int("run.kink_shifts", *e));
  if (const auto* e = get("run.threads")) cfg.threads = static_cast<unsigned>(parse_int("run.threads", *e));
  if (const auto* e = get("error.lattice_extra")) cfg.error.lattice_extra = static_cast<int>(parse_int("error.lattice_extra", *e));
  if (const auto* e = get("error.max_lattice")) cfg.error.max_lattice = parse_int("error.max_lattice", *e);
  if (const auto* e = get("error.qmc_points")) cfg.error.qmc_points = static_cast<std::size_t>(parse_int("error.qmc_points", *e));
  real("error.reference_offset", cfg.reference_offset);
  if (const auto* e = get("output.path")) cfg.output = e->value;
  if (const auto* e = get("output.format")) {
    cfg.format = e->value;
    if (cfg.format != "csv" && cfg.format != "jsonl")
      throw ConfigError(where("output.format", *e) + ": expected csv or jsonl");
  }
  if (const auto* e = get("output.plot")) cfg.plot = e->value;
  if (cfg.kink_shifts < 1) throw ConfigError("run.kink_shifts must be at least 1");
  if (!(cfg.reference_offset > 0)) throw ConfigError("error.reference_offset must be positive");

  try {
    s.validate(cfg.family);
    // Resolving the functional checks epsilon against its legal interval.
    functional_for(cfg.family, s);
  } catch (const ConfigError&) {
    throw;
  } catch (const SpecError& e) {
    throw ConfigError(e.what());
  }
  cfg.error.threads = cfg.threads;
  cfg.hash = config_hash(raw);
  return cfg;
}

// ---------------------------------------------------------------------------
// Sweeps

/// The spec used for cubature: errors are measured in L_1, so q = 1.
inline SmoothnessSpec integration_spec(SmoothnessSpec spec) {
  spec.q = 1.0;
  return spec;
}

struct SweepPoint {
  std::int64_t n_target = 0;
  double xi = 0.0;
  std::size_t levels = 0;
  std::int64_t n_declared = 0;
  std::int64_t n_distinct = 0;
  std::int64_t n_sampled = 0;
  double error = 0.0;
};

struct SweepResult {
  std::string function;
  std::vector<SweepPoint> points;
  std::optional<RateFit> fit;
  double predicted = 0.0;
};

inline BudgetFit fit_budget(std::int64_t n, Family family, const SmoothnessSpec& spec) {
  try {
    return xi_for_budget(n, family, functional_for(family, spec));
  } catch (const SpecError& e) {
    throw ConfigError("budget " + std::to_string(n) + ": " + e.what());
  }
}

namespace detail {

/// Runs fn over the budgets, in parallel across budgets, keeping budget order.
template <class Fn>
std::vector<SweepPoint> over_budgets(const ExperimentConfig& cfg, Fn&& fn) {
  std::vector<SweepPoint> out(cfg.budgets.size());
  const unsigned workers = cfg.threads ? cfg.threads : worker_count();
  const unsigned inner = workers > 1 ? 1 : 0;
  parallel_for(cfg.budgets.size(), workers, [&](std::size_t i) { out[i] = fn(cfg.budgets[i], inner); });
  return out;
}

inline void finish_fit(SweepResult& r) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : r.points) {
    if (!std::isfinite(p.error)) throw NumericalError("non-finite error for " + r.function);
    if (!pts.empty() && static_cast<double>(p.n_declared) <= pts.back().first) continue;
    if (p.error > 0) pts.emplace_back(static_cast<double>(p.n_declared), p.error);
  }
  if (pts.size() >= 4) r.fit = fit_rate(std::move(pts));
}

inline SweepPoint base_point(std::int64_t n, const BudgetFit& fit) {
  SweepPoint p;
  p.n_target = n;
  p.xi = fit.xi;
  p.levels = fit.set.size();
  p.n_declared = budget(fit.set);
  p.n_distinct = distinct_points(fit.set);
  return p;
}

}  // namespace detail

/// Recovery error per budget: discrete L_q error, or the energy surrogate
/// (against Delta''(xi + reference_offset)) for the energy family.
inline SweepResult recovery_sweep(const ExperimentConfig& cfg, const TestFunction& tf) {
  SweepResult res;
  res.function = tf.label;
  res.predicted = -cardinality_nu(cfg.spec, cfg.family);
  const SplineOrder order(cfg.spec.r);
  res.points = detail::over_budgets(cfg, [&](std::int64_t n, unsigned threads) {
    const BudgetFit fit = fit_budget(n, cfg.family, cfg.spec);
    SweepPoint p = detail::base_point(n, fit);
    const Reconstruction rec = build(tf.f, fit.set, order, threads);
    p.n_sampled = rec.sample_budget;
    if (cfg.family == Family::DeltaEnergy) {
      const LevelSet ref_set = make_level_set(cfg.family, fit.set.functional, fit.xi + cfg.reference_offset);
      const Reconstruction ref = build(tf.f, ref_set, order, threads);
      p.error = energy_error_surrogate(ref, rec, *cfg.spec.gamma, cfg.spec.q, cfg.spec.tau_value());
    } else {
      ErrorOptions eo = cfg.error;
      eo.threads = threads;
      p.error = discrete_lq_error(tf.f, rec, cfg.spec.q, eo);
    }
    return p;
  });
  detail::finish_fit(res);
  return res;
}

/// Kinks of the integration corpus with centres drawn uniformly from [1/4, 3/4]^d.
inline std::vector<TestFunction> shifted_kinks(const SmoothnessSpec& spec, int count, std::uint64_t seed) {
  const TestFunction centred = kink_for(spec, CorpusPurpose::Integration);
  std::vector<std::vector<double>> lambdas;
  for (auto a : kink_smoothness(spec)) {
    for (double& v : a) v = std::clamp(v - 1.0, 0.0, spec.r - 1 - 1e-3);
    lambdas.push_back(std::move(a));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.25, 0.75);
  std::vector<TestFunction> out;
  for (int i = 0; i < count; ++i) {
    std::vector<double> c(static_cast<std::size_t>(spec.d));
    for (double& v : c) v = u(rng);
    double integral = 0.0;
    for (const auto& l : lambdas) {
      double term = 1.0;
      for (std::size_t j = 0; j < c.size(); ++j)
        term *= l[j] == 0.0 ? 1.0 : (std::pow(c[j], l[j] + 1) + std::pow(1 - c[j], l[j] + 1)) / (l[j] + 1);
      integral += term;
    }
    TestFunction t;
    t.label = centred.label;
    t.exact_integral = integral;
    t.f = [lambdas, c](std::span<const double> x) {
      double sum = 0.0;
      for (const auto& l : lambdas) {
        double v = 1.0;
        for (std::size_t j = 0; j < x.size(); ++j) v *= l[j] == 0.0 ? 1.0 : std::pow(std::abs(x[j] - c[j]), l[j]);
        sum += v;
      }
      return sum;
    };
    out.push_back(std::move(t));
  }
  return out;
}

/// Cubature error per budget, |I(f) - I_n(f)|. For "kink" the error is the
/// mean over `kink_shifts` kinks with random centres (one kink when 1).
inline SweepResult integration_sweep(const ExperimentConfig& cfg, const std::string& name) {
  const SmoothnessSpec spec = integration_spec(cfg.spec);
  std::vector<TestFunction> family;
  if (name == "kink" && cfg.kink_shifts > 1) family = shifted_kinks(spec, cfg.kink_shifts, cfg.seed);
  else family.push_back(corpus_function(spec, name, CorpusPurpose::Integration));
  SweepResult res;
  res.function = family.size() > 1 ? "kink-mean" + std::to_string(family.size()) : family.front().label;
  res.predicted = -cardinality_nu(spec, cfg.family);
  const SplineOrder order(spec.r);
  res.points = detail::over_budgets(cfg, [&](std::int64_t n, unsigned threads) {
    const BudgetFit fit = fit_budget(n, cfg.family, spec);
    SweepPoint p = detail::base_point(n, fit);
    const CubatureRule rule = assemble_weights(fit.set, order, threads);
    p.n_sampled = static_cast<std::int64_t>(rule.size());
    double acc = 0.0;
    for (const auto& tf : family) acc += std::abs(apply_rule(rule, tf.f, threads) - tf.exact_integral);
    p.error = acc / static_cast<double>(family.size());
    return p;
  });
  detail::finish_fit(res);
  return res;
}

struct GridRow {
  std::int64_t n_target = 0;
  double xi = 0.0;
  std::size_t levels = 0;
  std::int64_t n_declared = 0;
  std::int64_t n_distinct = 0;
  int max_level = 0;
  double nu = 0.0;
  double ratio = 0.0;  // n_declared / 2^{xi/nu}
};

inline std::vector<GridRow> gridinfo(const ExperimentConfig& cfg) {
  const double nu = cardinality_nu(cfg.spec, cfg.family);
  std::vector<GridRow> rows;
  for (std::int64_t n : cfg.budgets) {
    const BudgetFit fit = fit_budget(n, cfg.family, cfg.spec);
    GridRow r;
    r.n_target = n;
    r.xi = fit.xi;
    r.levels = fit.set.size();
    r.n_declared = budget(fit.set);
    r.n_distinct = distinct_points(fit.set);
    r.max_level = fit.set.max_level();
    r.nu = nu;
    r.ratio = static_cast<double>(r.n_declared) / std::exp2(fit.xi / nu);
    rows.push_back(r);
  }
  return rows;
}

struct CompareRow {
  double xi = 0.0;
  double lambda = 0.0;
  std::int64_t n_aniso = 0;
  std::int64_t n_smolyak = 0;
  std::int64_t n_full = 0;
};

/// Budgets of the anisotropic, Smolyak and full-grid sets at equal xi, with
/// lambda = nu for the comparison sets unless configured.
inline std::vector<CompareRow> compare(const ExperimentConfig& cfg) {
  const double lambda = cfg.lambda.value_or(cardinality_nu(cfg.spec, cfg.family));
  const LevelFunctional phi = functional_for(cfg.family, cfg.spec);
  std::vector<double> xis = cfg.xis;
  if (xis.empty())
    for (std::int64_t n : cfg.budgets) xis.push_back(fit_budget(n, cfg.family, cfg.spec).xi);
  std::vector<CompareRow> rows;
  for (double xi : xis) {
    CompareRow r;
    r.xi = xi;
    r.lambda = lambda;
    r.n_aniso = budget(make_level_set(cfg.family, phi, xi));
    r.n_smolyak = budget(comparison_sets(xi, lambda, Family::Smolyak, cfg.spec.d));
    r.n_full = budget(comparison_sets(xi, lambda, Family::FullGrid, cfg.spec.d));
    rows.push_back(r);
  }
  return rows;
}

/// The level set selected by the first grid.xi value, else the first budget.
inline LevelSet selected_set(const ExperimentConfig& cfg, const SmoothnessSpec& spec) {
  if (!cfg.xis.empty()) return make_level_set(cfg.family, functional_for(cfg.family, spec), cfg.xis.front());
  return fit_budget(cfg.budgets.front(), cfg.family, spec).set;
}

// ---------------------------------------------------------------------------
// Tables

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<nlohmann::json>> rows;

  void write(std::ostream& os, const std::string& format) const {
    if (format == "jsonl") {
      for (const auto& row : rows) {
        nlohmann::ordered_json j;
        for (std::size_t i = 0; i < header.size(); ++i) j[header[i]] = row[i];
        os << j.dump() << '\n';
      }
      return;
    }
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        const auto& v = row[i];
        if (v.is_null()) continue;
        if (v.is_string()) os << v.get<std::string>();
        else if (v.is_number_float()) os << format_real(v.get<double>());
        else os << v.dump();
      }
      os << '\n';
    }
  }

  static std::string format_real(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
  }
};

inline nlohmann::json real_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

inline Table sweep_table(const ExperimentConfig& cfg, const std::string& command, const std::vector<SweepResult>& results) {
  Table t;
  t.header = {"hash", "command", "family", "row", "function", "n_target", "xi", "levels",
              "n_declared", "n_distinct", "n_sampled", "error", "slope", "predicted"};
  for (const auto& r : results) {
    for (const auto& p : r.points)
      t.rows.push_back({cfg.hash, command, to_string(cfg.family), "point", r.function, p.n_target, p.xi, p.levels,
                        p.n_declared, p.n_distinct, p.n_sampled, real_or_null(p.error), nullptr, nullptr});
    t.rows.push_back({cfg.hash, command, to_string(cfg.family), "fit", r.function, nullptr, nullptr, nullptr, nullptr,
                      nullptr, nullptr, nullptr, r.fit ? nlohmann::json(r.fit->slope) : nlohmann::json(), r.predicted});
  }
  return t;
}

inline void write_plot_files(const std::string& prefix, const std::vector<SweepResult>& results) {
  for (const auto& r : results) {
    std::string name = r.function;
    for (char& c : name)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
    std::ofstream out(prefix + "_" + name + ".csv");
    if (!out) throw ConfigError("cannot write plot file with prefix '" + prefix + "'");
    out << "n,error\n";
    for (const auto& p : r.points) out << p.n_declared << ',' << Table::format_real(p.error) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Entry point

/// Runs the tool; returns the process exit code (0 ok, 2 config error, 3 numerical failure).
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse-grid sampling recovery and cubature with B-spline quasi-interpolation"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  struct Flag {
    const char* name;
    const char* key;
    const char* help;
  };
  static const Flag flags[] = {
      {"--p", "spec.p", "integrability p"},         {"--theta", "spec.theta", "summability theta"},
      {"--q", "spec.q", "error norm q"},            {"--r", "spec.r", "spline order 1..4"},
      {"--d", "spec.d", "dimension"},               {"--a", "spec.a", "mixed smoothness vector a_1,...,a_d"},
      {"--alpha", "spec.alpha", "hybrid alpha"},    {"--beta", "spec.beta", "hybrid beta"},
      {"--gamma", "spec.gamma", "energy exponent"}, {"--tau", "spec.tau", "energy summability"},
      {"--epsilon", "spec.epsilon", "class-B perturbation"},
      {"--family", "grid.family", "hybrid, mixed or energy"},
      {"--budgets", "grid.budgets", "comma-separated sample budgets"},
      {"--xi", "grid.xi", "comma-separated xi values"},
      {"--lambda", "grid.lambda", "comparison-set lambda (default nu)"},
      {"--functions", "run.functions", "corpus functions: poly, sin, kink"},
      {"--seed", "run.seed", "seed for randomized corpus members"},
      {"--kink-shifts", "run.kink_shifts", "kinks averaged by integrate"},
      {"--qmc-points", "error.qmc_points", "Halton points beyond the lattice cap"},
      {"--max-lattice", "error.max_lattice", "largest error lattice (points)"},
      {"--reference-offset", "error.reference_offset", "xi offset of the energy reference set"},
      {"--output,-o", "output.path", "output file ('-' for stdout)"},
      {"--format", "output.format", "csv or jsonl"},
      {"--plot", "output.plot", "prefix for n,error plot files"},
  };
  std::map<std::string, std::string> flag_values;
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"gridinfo", "level-set sizes per budget"},
           {"recover", "recovery error sweep with fitted slopes"},
           {"integrate", "cubature error sweep with fitted slopes"},
           {"compare", "budgets of anisotropic, Smolyak and full grids at equal xi"},
           {"export-rule", "cubature weights as CSV"},
           {"dump-grid", "level set in text form"}}) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "config file (key = value with [sections])");
    sub->add_option("--set", overrides, "override section.key=value (repeatable)");
    for (const auto& f : flags) sub->add_option(f.name, flag_values[f.key], f.help);
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    RawConfig raw = config_path.empty() ? RawConfig{} : read_config_file(config_path);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      const std::string key = trim(o.substr(0, eq));
      const auto& keys = known_keys();
      if (eq == std::string::npos || std::find(keys.begin(), keys.end(), key) == keys.end())
        throw ConfigError("--set " + o + ": expected a known section.key=value");
      raw[key] = {trim(o.substr(eq + 1)), 0};
    }
    // Named flags are applied last and win over --set and the file.
    for (const auto& [key, value] : flag_values)
      if (!value.empty()) raw[key] = {value, 0};
    const ExperimentConfig cfg = make_config(raw);

    std::ofstream file;
    std::ostream* os = &out;
    if (cfg.output != "-") {
      file.open(cfg.output);
      if (!file) throw ConfigError("cannot open output file '" + cfg.output + "'");
      os = &file;
    }

    std::string command;
    for (auto* s : subs)
      if (s->parsed()) command = s->get_name();

    if (command == "gridinfo") {
      Table t;
      t.header = {"hash", "family", "class", "n_target", "xi", "levels", "n_declared", "n_distinct", "max_level", "nu", "ratio"};
      const std::string cls = cfg.family == Family::DeltaEnergy ? (cfg.spec.theta_exceeds_tau_star() ? "B" : "A")
                                                                 : to_string(cfg.spec.triple_class());
      for (const auto& r : gridinfo(cfg))
        t.rows.push_back({cfg.hash, to_string(cfg.family), cls, r.n_target, r.xi, r.levels, r.n_declared, r.n_distinct,
                          r.max_level, r.nu, r.ratio});
      t.write(*os, cfg.format);
    } else if (command == "recover" || command == "integrate") {
      std::vector<SweepResult> results;
      for (const auto& name : cfg.functions) {
        if (command == "recover") results.push_back(recovery_sweep(cfg, corpus_function(cfg.spec, name)));
        else results.push_back(integration_sweep(cfg, name));
      }
      sweep_table(cfg, command, results).write(*os, cfg.format);
      if (!cfg.plot.empty()) write_plot_files(cfg.plot, results);
    } else if (command == "compare") {
      Table t;
      t.header = {"hash", "family", "xi", "lambda", "n_aniso", "n_smolyak", "n_full", "smolyak_over_aniso", "full_over_aniso"};
      for (const auto& r : compare(cfg))
        t.rows.push_back({cfg.hash, to_string(cfg.family), r.xi, r.lambda, r.n_aniso, r.n_smolyak, r.n_full,
                          static_cast<double>(r.n_smolyak) / static_cast<double>(r.n_aniso),
                          static_cast<double>(r.n_full) / static_cast<double>(r.n_aniso)});
      t.write(*os, cfg.format);
    } else if (command == "export-rule") {
      const SmoothnessSpec spec = integration_spec(cfg.spec);
      write_rule_csv(*os, assemble_weights(selected_set(cfg, spec), SplineOrder(spec.r), cfg.threads));
    } else if (command == "dump-grid") {
      write_levels(*os, selected_set(cfg, cfg.spec));
    }
    return 0;
  } catch (const SpecError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace qsg::cli
