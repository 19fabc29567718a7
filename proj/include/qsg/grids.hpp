// Smoothness parameters, anisotropic level sets and their sample grids.
//
// Every level set here has the form {k >= 0 : phi(k) <= xi} for a functional
//   phi(k) = sum_i w_i k_i + l1 |k|_1 + linf |k|_inf
// that is nondecreasing in each coordinate and grows along every axis, so the
// sets are finite, downward closed and can be enumerated coordinate by coordinate.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "qsg/bspline.hpp"
#include "qsg/dyadic.hpp"
#include "qsg/tensor.hpp"

namespace qsg {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Parameter or configuration error; the message names the violated constraint.
class SpecError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

enum class TripleClass { A, B };

inline const char* to_string(TripleClass c) { return c == TripleClass::A ? "A" : "B"; }

/// (1/p - 1/q)_+ with 1/inf = 0.
inline double sobolev_gap(double p, double q) { return std::max(0.0, 1.0 / p - 1.0 / q); }

/// Sup-form (A) versus sum-form (B) error bound regime of (p, theta, q).
/// The three A cases are read on the disjoint regimes p >= q, p < q < inf, p < q = inf.
inline TripleClass classify_triple(double p, double theta, double q) {
  if (!(p > 0) || !(theta > 0) || !(q > 0)) throw SpecError("p, theta, q must lie in (0, inf]");
  bool a = false;
  if (p >= q) a = theta <= std::min(q, 1.0);
  else if (q < kInf) a = theta <= q;
  else a = theta <= 1.0;
  return a ? TripleClass::A : TripleClass::B;
}

struct MixedVector {
  std::vector<double> a;
};

struct Hybrid {
  double alpha = 0.0;
  double beta = 0.0;
};

enum class Family { DeltaHybrid, DeltaMixed, DeltaEnergy, FullGrid, Smolyak };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::DeltaHybrid: return "hybrid";
    case Family::DeltaMixed: return "mixed";
    case Family::DeltaEnergy: return "energy";
    case Family::FullGrid: return "full";
    case Family::Smolyak: return "smolyak";
  }
  return "?";
}

inline Family family_from_string(const std::string& s) {
  if (s == "hybrid") return Family::DeltaHybrid;
  if (s == "mixed") return Family::DeltaMixed;
  if (s == "energy") return Family::DeltaEnergy;
  if (s == "full") return Family::FullGrid;
  if (s == "smolyak") return Family::Smolyak;
  throw SpecError("unknown family '" + s + "' (expected hybrid, mixed, energy, full, smolyak)");
}

/// Recovery problem parameters.
struct SmoothnessSpec {
  double p = 2.0;
  double theta = 2.0;
  double q = 2.0;
  int r = 4;
  int d = 2;
  std::variant<MixedVector, Hybrid> kind = Hybrid{};
  std::optional<double> gamma;    // energy exponent (Hybrid only)
  std::optional<double> tau;      // energy norm summability; defaults to q
  std::optional<double> epsilon;  // class-B perturbation; defaults to half its upper bound

  bool is_hybrid() const { return std::holds_alternative<Hybrid>(kind); }
  const Hybrid& hybrid() const { return std::get<Hybrid>(kind); }
  const MixedVector& mixed() const { return std::get<MixedVector>(kind); }
  double gap() const { return sobolev_gap(p, q); }
  TripleClass triple_class() const { return classify_triple(p, theta, q); }
  double tau_value() const { return tau.value_or(q); }
  /// theta > tau* = min(tau, 1): selects the perturbed energy sets.
  bool theta_exceeds_tau_star() const { return theta > std::min(tau_value(), 1.0); }

  /// Checks the parameter conditions of `family`; throws SpecError naming the violated one.
  void validate(Family family) const {
    if (r < 1 || r > 4) throw SpecError("order r must lie in 1..4");
    if (d < 1) throw SpecError("dimension d must be positive");
    classify_triple(p, theta, q);
    if (family == Family::DeltaMixed) {
      if (is_hybrid()) throw SpecError("family mixed requires a smoothness vector a");
      const auto& a = mixed().a;
      if (static_cast<int>(a.size()) != d) throw SpecError("smoothness vector a must have d entries");
      if (!(1.0 / p < a[0])) throw SpecError("mixed smoothness requires 1/p < a_1");
      if (d >= 2 && !(a[0] < a[1])) throw SpecError("mixed smoothness requires a_1 < a_2");
      for (int i = 1; i + 1 < d; ++i)
        if (a[static_cast<std::size_t>(i)] > a[static_cast<std::size_t>(i + 1)])
          throw SpecError("mixed smoothness requires a_2 <= ... <= a_d");
      if (!(a.back() < r)) throw SpecError("mixed smoothness requires a_d < r");
      return;
    }
    if (family == Family::DeltaHybrid || family == Family::DeltaEnergy) {
      if (!is_hybrid()) throw SpecError("family " + std::string(to_string(family)) + " requires alpha and beta");
      const auto [alpha, beta] = hybrid();
      if (alpha < 0) throw SpecError("hybrid smoothness requires alpha >= 0");
      const double lo = std::min(alpha, alpha + beta), hi = std::max(alpha, alpha + beta);
      if (!(1.0 / p < lo)) throw SpecError("hybrid smoothness requires 1/p < min(alpha, alpha + beta)");
      if (!(hi < r)) throw SpecError("hybrid smoothness requires max(alpha, alpha + beta) < r");
      if (family == Family::DeltaHybrid && beta == 0.0) throw SpecError("hybrid smoothness requires beta != 0");
      if (family == Family::DeltaEnergy) {
        if (!gamma) throw SpecError("energy family requires gamma");
        const double g = *gamma;
        if (!(g > 0) || !(g < std::min<double>(r, r - 1 + 1.0 / p)))
          throw SpecError("energy family requires 0 < gamma < min(r, r - 1 + 1/p)");
        if (beta == g) throw SpecError("energy family requires beta != gamma");
        if (beta > g && !(alpha > (g - beta) / d)) throw SpecError("energy family requires alpha > (gamma - beta)/d");
        if (beta < g && !(alpha - gap() > g - beta))
          throw SpecError("energy family requires alpha - (1/p - 1/q)_+ > gamma - beta");
      }
    }
  }
};

/// phi(k) = sum_i w_i k_i + l1 |k|_1 + linf |k|_inf.
struct LevelFunctional {
  std::vector<double> w;
  double l1 = 0.0;
  double linf = 0.0;

  double operator()(std::span<const int> k) const {
    double v = l1 * l1_norm(k) + linf * linf_norm(k);
    for (std::size_t i = 0; i < k.size(); ++i) v += w[i] * k[i];
    return v;
  }

  /// Smallest increase of phi when one coordinate grows by one.
  double min_increment() const {
    double m = kInf;
    for (double wi : w) m = std::min(m, wi + l1 + std::min(linf, 0.0));
    return m;
  }

  /// Smallest increase along a coordinate axis, where |k|_1 = |k|_inf.
  double min_axis_increment() const {
    double m = kInf;
    for (double wi : w) m = std::min(m, wi + l1 + linf);
    return m;
  }

  /// Nondecreasing in every coordinate and unbounded along every axis.
  bool admissible() const { return min_increment() >= 0.0 && min_axis_increment() > 0.0; }

  std::size_t dim() const { return w.size(); }
};

namespace detail {
inline double xi_tolerance(double xi) { return 1e-9 * std::max(1.0, std::abs(xi)); }
}  // namespace detail

/// A downward-closed finite set of levels, sorted lexicographically.
struct LevelSet {
  Family family = Family::DeltaHybrid;
  double xi = 0.0;
  LevelFunctional functional;
  std::vector<Level> levels;

  std::size_t size() const noexcept { return levels.size(); }
  int dim() const noexcept { return levels.empty() ? 0 : static_cast<int>(levels.front().size()); }

  bool contains(std::span<const int> k) const {
    return std::binary_search(levels.begin(), levels.end(), Level(k.begin(), k.end()));
  }

  int max_level() const {
    int m = 0;
    for (const auto& k : levels) m = std::max(m, linf_norm(k));
    return m;
  }

  bool is_downward_closed() const {
    for (const auto& k : levels) {
      Level down = k;
      for (std::size_t i = 0; i < k.size(); ++i) {
        if (k[i] == 0) continue;
        --down[i];
        if (!contains(down)) return false;
        ++down[i];
      }
    }
    return true;
  }
};

/// Number of samples of level k counted with multiplicity: prod_j (2^{k_j} + 1).
inline std::int64_t level_budget(std::span<const int> k) {
  std::int64_t n = 1;
  for (int v : k) n *= (std::int64_t{1} << v) + 1;
  return n;
}

/// n = sum_{k in Delta} prod_j (2^{k_j} + 1).
inline std::int64_t budget(const LevelSet& delta) {
  std::int64_t n = 0;
  for (const auto& k : delta.levels) n += level_budget(k);
  return n;
}

/// Number of distinct points of G(Delta). For a downward-closed set every
/// point has a unique coordinatewise minimal level l in Delta, and level l
/// contributes prod_i (2 if l_i = 0 else 2^{l_i - 1}) new points.
inline std::int64_t distinct_points(const LevelSet& delta) {
  std::int64_t n = 0;
  for (const auto& k : delta.levels) {
    std::int64_t p = 1;
    for (int v : k) p *= v == 0 ? 2 : (std::int64_t{1} << (v - 1));
    n += p;
  }
  return n;
}

/// All k >= 0 with phi(k) <= xi.
inline std::vector<Level> enumerate_levels(const LevelFunctional& phi, double xi) {
  if (!phi.admissible()) throw SpecError("level functional is not increasing in every coordinate");
  std::vector<Level> out;
  if (xi < 0) return out;
  const std::size_t d = phi.dim();
  const double bound = xi + detail::xi_tolerance(xi);
  Level k(d, 0);
  // Coordinates beyond the current one are zero, which minimizes phi.
  auto recurse = [&](auto&& self, std::size_t i) -> void {
    if (i == d) {
      out.push_back(k);
      return;
    }
    for (k[i] = 0; phi(k) <= bound; ++k[i]) self(self, i + 1);
    k[i] = 0;
  };
  recurse(recurse, 0);
  std::sort(out.begin(), out.end());
  return out;
}

inline LevelSet make_level_set(Family family, const LevelFunctional& phi, double xi) {
  LevelSet set;
  set.family = family;
  set.xi = xi;
  set.functional = phi;
  set.levels = enumerate_levels(phi, xi);
  return set;
}

// ---------------------------------------------------------------------------
// Defining functionals of the families

/// Upper bound of the class-B perturbation epsilon.
inline double epsilon_upper_bound(const SmoothnessSpec& spec, Family family) {
  switch (family) {
    case Family::DeltaHybrid: {
      const auto [alpha, beta] = spec.hybrid();
      return std::min(alpha - spec.gap(), std::abs(beta));
    }
    case Family::DeltaMixed: {
      const auto& a = spec.mixed().a;
      return a.size() >= 2 ? a[1] - a[0] : kInf;
    }
    case Family::DeltaEnergy: {
      const auto [alpha, beta] = spec.hybrid();
      const double g = spec.gamma.value_or(0.0);
      double ub = std::min(alpha - spec.gap(), std::abs(g - beta));
      // For beta < gamma the perturbed functional loses 2 epsilon per axis step.
      if (beta < g) ub = std::min(ub, 0.5 * (alpha - spec.gap() - (g - beta)));
      return ub;
    }
    default:
      return kInf;
  }
}

/// The epsilon in use: the configured value (checked) or half the upper bound.
inline double resolve_epsilon(const SmoothnessSpec& spec, Family family) {
  const double ub = epsilon_upper_bound(spec, family);
  if (!spec.epsilon) return std::isfinite(ub) ? 0.5 * ub : 0.0;
  const double e = *spec.epsilon;
  if (!(e > 0 && e < ub)) {
    std::ostringstream msg;
    msg << "epsilon violates class-B constraint: need 0 < epsilon < " << ub;
    throw SpecError(msg.str());
  }
  return e;
}

/// (alpha - g)|k|_1 + beta|k|_inf (class A) or the epsilon-relaxed variants (class B).
inline LevelFunctional hybrid_functional(const SmoothnessSpec& spec, TripleClass cls) {
  const auto [alpha, beta] = spec.hybrid();
  LevelFunctional phi;
  phi.w.assign(static_cast<std::size_t>(spec.d), 0.0);
  const double base = alpha - spec.gap();
  if (cls == TripleClass::A) {
    phi.l1 = base;
    phi.linf = beta;
    return phi;
  }
  const double eps = resolve_epsilon(spec, Family::DeltaHybrid);
  if (beta > 0) {
    phi.l1 = base + eps / spec.d;
    phi.linf = beta - eps;
  } else {
    phi.l1 = base - eps;
    phi.linf = beta + eps;
  }
  return phi;
}

/// (a, k) - g|k|_1 (class A) or (a(eps), k) - g|k|_1 with a(eps) = (a_1, a_2 - eps, ...).
inline LevelFunctional mixed_functional(const SmoothnessSpec& spec, TripleClass cls) {
  LevelFunctional phi;
  phi.w = spec.mixed().a;
  phi.l1 = -spec.gap();
  if (cls == TripleClass::B) {
    const double eps = resolve_epsilon(spec, Family::DeltaMixed);
    for (std::size_t i = 1; i < phi.w.size(); ++i) phi.w[i] -= eps;
  }
  return phi;
}

/// (alpha - g)|k|_1 - (gamma - beta)|k|_inf and its epsilon variants for theta > tau*.
inline LevelFunctional energy_functional(const SmoothnessSpec& spec, bool theta_exceeds_tau_star) {
  const auto [alpha, beta] = spec.hybrid();
  if (!spec.gamma) throw SpecError("energy family requires gamma");
  const double g = *spec.gamma;
  LevelFunctional phi;
  phi.w.assign(static_cast<std::size_t>(spec.d), 0.0);
  const double base = alpha - spec.gap();
  if (!theta_exceeds_tau_star) {
    phi.l1 = base;
    phi.linf = -(g - beta);
    return phi;
  }
  const double eps = resolve_epsilon(spec, Family::DeltaEnergy);
  if (beta > g) {
    phi.l1 = base + eps / spec.d;
    phi.linf = -(g - beta - eps);
  } else {
    phi.l1 = base - eps;
    phi.linf = -(g - beta + eps);
  }
  return phi;
}

/// lambda |k|_inf (full grid) or lambda |k|_1 (Smolyak).
inline LevelFunctional comparison_functional(double lambda, Family kind, int d) {
  if (!(lambda > 0)) throw SpecError("comparison sets require lambda > 0");
  LevelFunctional phi;
  phi.w.assign(static_cast<std::size_t>(d), 0.0);
  if (kind == Family::FullGrid) phi.linf = lambda;
  else if (kind == Family::Smolyak) phi.l1 = lambda;
  else throw SpecError("comparison sets are full or smolyak");
  return phi;
}

inline LevelSet delta_hybrid(double xi, const SmoothnessSpec& spec, TripleClass cls) {
  return make_level_set(Family::DeltaHybrid, hybrid_functional(spec, cls), xi);
}

inline LevelSet delta_mixed(double xi, const SmoothnessSpec& spec, TripleClass cls) {
  return make_level_set(Family::DeltaMixed, mixed_functional(spec, cls), xi);
}

inline LevelSet delta_energy(double xi, const SmoothnessSpec& spec, bool theta_exceeds_tau_star) {
  return make_level_set(Family::DeltaEnergy, energy_functional(spec, theta_exceeds_tau_star), xi);
}

inline LevelSet comparison_sets(double xi, double lambda, Family kind, int d) {
  return make_level_set(kind, comparison_functional(lambda, kind, d), xi);
}

/// The functional of `family` for `spec` (class from the spec's triple; the
/// comparison families use lambda = nu of the hybrid or mixed problem).
inline LevelFunctional functional_for(Family family, const SmoothnessSpec& spec, double lambda = 0.0) {
  switch (family) {
    case Family::DeltaHybrid: return hybrid_functional(spec, spec.triple_class());
    case Family::DeltaMixed: return mixed_functional(spec, spec.triple_class());
    case Family::DeltaEnergy: return energy_functional(spec, spec.theta_exceeds_tau_star());
    default: return comparison_functional(lambda, family, spec.d);
  }
}

/// Exponent nu with |G(Delta(xi))| ~ 2^{xi/nu}.
inline double cardinality_nu(const SmoothnessSpec& spec, Family family) {
  const double g = spec.gap();
  switch (family) {
    case Family::DeltaHybrid: {
      const auto [alpha, beta] = spec.hybrid();
      return beta > 0 ? alpha + beta / spec.d - g : alpha + beta - g;
    }
    case Family::DeltaMixed:
      return spec.mixed().a[0] - g;
    case Family::DeltaEnergy: {
      const auto [alpha, beta] = spec.hybrid();
      const double gm = spec.gamma.value_or(0.0);
      return beta > gm ? alpha - (gm - beta) / spec.d - g : alpha - (gm - beta) - g;
    }
    default:
      throw SpecError("nu is defined for hybrid, mixed and energy families");
  }
}

// ---------------------------------------------------------------------------
// Sample grids

/// G(Delta) with the with-multiplicity budget and the distinct-point count.
struct SampleGrid {
  std::vector<Level> levels;
  std::int64_t budget = 0;
  std::int64_t distinct = 0;

  /// Calls fn(k, s) for every s in I^d(k) = {0 <= s_i <= 2^{k_i}}.
  template <class Fn>
  void for_each_pair(Fn&& fn) const {
    for (const auto& k : levels) {
      std::vector<int> ext(k.size());
      for (std::size_t i = 0; i < k.size(); ++i) ext[i] = (1 << k[i]) + 1;
      std::vector<int> s(k.size(), 0);
      do {
        fn(k, s);
      } while (next_index(s, ext));
    }
  }

  /// The deduplicated point set (explicit enumeration).
  std::vector<DyadicPoint> distinct_point_list() const {
    std::unordered_set<DyadicPoint, DyadicPointHash> seen;
    for_each_pair([&](const Level& k, const std::vector<int>& s) {
      DyadicPoint p;
      p.num.resize(k.size());
      for (std::size_t i = 0; i < k.size(); ++i) p.num[i] = DyadicPoint::encode(s[i], k[i]);
      seen.insert(std::move(p));
    });
    std::vector<DyadicPoint> out(seen.begin(), seen.end());
    std::sort(out.begin(), out.end());
    return out;
  }
};

inline SampleGrid sample_grid(const LevelSet& delta) {
  return {delta.levels, budget(delta), distinct_points(delta)};
}

/// Largest breakpoint xi of phi with budget(Delta(xi)) <= n, and its level set.
struct BudgetFit {
  double xi = 0.0;
  LevelSet set;
};

inline BudgetFit xi_for_budget(std::int64_t n, Family family, const LevelFunctional& phi) {
  const LevelSet base = make_level_set(family, phi, 0.0);
  if (n < budget(base)) throw SpecError("budget below minimal grid");
  // Grow xi until the budget is exceeded; every breakpoint below lies in this set.
  double hi = std::max(1.0, phi.min_axis_increment());
  LevelSet cover = make_level_set(family, phi, hi);
  while (budget(cover) <= n) {
    hi *= 2.0;
    cover = make_level_set(family, phi, hi);
  }
  struct Entry {
    double value;
    std::int64_t cost;
  };
  std::vector<Entry> entries;
  entries.reserve(cover.size());
  for (const auto& k : cover.levels) entries.push_back({phi(k), level_budget(k)});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });
  // Breakpoint groups with their cumulative budgets; bisect for the last group within n.
  std::vector<double> breaks;
  std::vector<std::int64_t> cumulative;
  std::int64_t running = 0;
  for (std::size_t i = 0; i < entries.size();) {
    std::size_t j = i;
    double top = entries[i].value;
    while (j < entries.size() && entries[j].value <= entries[i].value + detail::xi_tolerance(entries[i].value)) {
      running += entries[j].cost;
      top = entries[j].value;
      ++j;
    }
    breaks.push_back(top);
    cumulative.push_back(running);
    i = j;
  }
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), n);
  const std::size_t idx = static_cast<std::size_t>(it - cumulative.begin()) - 1;
  BudgetFit fit;
  fit.xi = breaks[idx];
  fit.set = make_level_set(family, phi, fit.xi);
  return fit;
}

// ---------------------------------------------------------------------------
// Text format: one level per line, "k_1 k_2 ... k_d", lexicographic order.

inline void write_levels(std::ostream& os, const LevelSet& set) {
  for (const auto& k : set.levels) {
    for (std::size_t i = 0; i < k.size(); ++i) os << (i ? " " : "") << k[i];
    os << '\n';
  }
}

inline std::vector<Level> read_levels(std::istream& is) {
  std::vector<Level> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Level k;
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      int v = -1;
      try {
        v = std::stoi(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || v < 0) throw SpecError("line " + std::to_string(lineno) + ": invalid level entry '" + tok + "'");
      k.push_back(v);
    }
    if (!out.empty() && out.front().size() != k.size())
      throw SpecError("line " + std::to_string(lineno) + ": inconsistent dimension");
    out.push_back(std::move(k));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace qsg
