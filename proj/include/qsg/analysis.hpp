// Error estimators, discrete quasi-norms, rate fitting and the test corpus.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qsg/bspline.hpp"
#include "qsg/dyadic.hpp"
#include "qsg/grids.hpp"
#include "qsg/parallel.hpp"
#include "qsg/recovery.hpp"

namespace qsg {

// ---------------------------------------------------------------------------
// Discrete L_q norms

struct ErrorOptions {
  int lattice_extra = 3;                      // lattice 2^{L + extra} + 1 per dimension
  std::int64_t resolution = 0;                // per-dimension count; 0 = derive from the level set
  std::int64_t max_lattice = std::int64_t{1} << 24;
  std::size_t qmc_points = 1'000'000;         // used beyond max_lattice
  unsigned threads = 0;
};

namespace detail {

inline double radical_inverse(std::uint64_t i, unsigned base) {
  double inv = 1.0 / base, f = inv, v = 0.0;
  while (i > 0) {
    v += static_cast<double>(i % base) * f;
    i /= base;
    f *= inv;
  }
  return v;
}

inline constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

/// Accumulates sum w |g|^q (or max |g|) in chunks, combined in chunk order.
template <class Point>
double lq_accumulate(std::size_t count, double q, unsigned threads, Point&& point) {
  constexpr std::size_t chunk = 1024;
  const std::size_t chunks = (count + chunk - 1) / chunk;
  std::vector<double> partial(chunks, 0.0);
  parallel_for(chunks, threads, [&](std::size_t c) {
    double acc = 0.0;
    const std::size_t end = std::min(count, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      const auto [w, g] = point(i);
      const double a = std::abs(g);
      if (std::isinf(q)) acc = std::max(acc, a);
      else acc += w * std::pow(a, q);
    }
    partial[c] = acc;
  });
  double total = 0.0;
  for (double v : partial) total = std::isinf(q) ? std::max(total, v) : total + v;
  return total;
}

inline double finish_lq(double total, double q) { return std::isinf(q) ? total : std::pow(total, 1.0 / q); }

}  // namespace detail

/// ||g||_q on [0,1]^d by the composite tensor trapezoid rule on a lattice with
/// `per_dim` points per axis (max over the lattice for q = inf).
inline double lattice_lq_norm(const Function& g, int d, double q, std::int64_t per_dim, unsigned threads = 0) {
  if (!(q > 0)) throw std::invalid_argument("q must lie in (0, inf]");
  if (per_dim < 2) throw std::invalid_argument("lattice needs at least 2 points per dimension");
  std::size_t count = 1;
  for (int i = 0; i < d; ++i) count *= static_cast<std::size_t>(per_dim);
  const double h = 1.0 / static_cast<double>(per_dim - 1);
  const double total = detail::lq_accumulate(count, q, threads, [&](std::size_t idx) {
    std::vector<double> x(static_cast<std::size_t>(d));
    double w = 1.0;
    for (int i = d; i-- > 0;) {
      const std::int64_t j = static_cast<std::int64_t>(idx % static_cast<std::size_t>(per_dim));
      idx /= static_cast<std::size_t>(per_dim);
      x[static_cast<std::size_t>(i)] = static_cast<double>(j) * h;
      w *= (j == 0 || j == per_dim - 1) ? 0.5 * h : h;
    }
    return std::pair{w, g(x)};
  });
  return detail::finish_lq(total, q);
}

/// ||g||_q estimated with equal weights on the first `count` Halton points.
inline double halton_lq_norm(const Function& g, int d, double q, std::size_t count, unsigned threads = 0) {
  if (!(q > 0)) throw std::invalid_argument("q must lie in (0, inf]");
  if (d > static_cast<int>(std::size(detail::kPrimes))) throw std::invalid_argument("dimension too large for Halton points");
  const double w = 1.0 / static_cast<double>(count);
  const double total = detail::lq_accumulate(count, q, threads, [&](std::size_t idx) {
    std::vector<double> x(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) x[static_cast<std::size_t>(i)] = detail::radical_inverse(idx + 1, detail::kPrimes[i]);
    return std::pair{w, g(x)};
  });
  return detail::finish_lq(total, q);
}

/// Per-dimension lattice size for a level set (0 when the cap forces Halton points).
inline std::int64_t default_resolution(int max_level, int d, const ErrorOptions& opt) {
  const int bits = max_level + opt.lattice_extra;
  if (bits * d > 62) return 0;
  const std::int64_t per_dim = (std::int64_t{1} << bits) + 1;
  double total = 1.0;
  for (int i = 0; i < d; ++i) total *= static_cast<double>(per_dim);
  return total <= static_cast<double>(opt.max_lattice) ? per_dim : 0;
}

/// ||f - R||_q on a lattice (or Halton points beyond the lattice cap).
inline double discrete_lq_error(const Function& f, const Reconstruction& rec, double q, const ErrorOptions& opt = {}) {
  const int d = rec.dim();
  const std::int64_t res = opt.resolution > 0 ? opt.resolution : default_resolution(rec.delta.max_level(), d, opt);
  if (res > 0) {
    // R on the whole lattice at once, looked up by the lattice index of each point.
    const std::vector<double> r = evaluate_on_lattice(rec, res);
    const double scale = static_cast<double>(res - 1);
    auto diff = [&](std::span<const double> p) {
      std::size_t off = 0;
      for (double v : p) off = off * static_cast<std::size_t>(res) + static_cast<std::size_t>(std::llround(v * scale));
      return f(p) - r[off];
    };
    return lattice_lq_norm(diff, d, q, res, opt.threads);
  }
  auto diff = [&](std::span<const double> x) { return f(x) - rec.evaluate(x); };
  return halton_lq_norm(diff, d, q, opt.qmc_points, opt.threads);
}

// ---------------------------------------------------------------------------
// Coefficient quasi-norms

/// ||c||_{p,k}: the l_p norm of a coefficient box (max for p = inf).
inline double coefficient_lp_norm(const ShiftBox& box, double p) {
  double acc = 0.0;
  for (double c : box.values) acc = std::isinf(p) ? std::max(acc, std::abs(c)) : acc + std::pow(std::abs(c), p);
  return std::isinf(p) ? acc : std::pow(acc, 1.0 / p);
}

/// 2^{-|k|_1/p} ||c||_{p,k}, the level norm equivalent to ||sum_s c_s M_{k,s}||_p.
inline double level_norm(const ShiftBox& box, std::span<const int> k, double p) {
  const double scale = std::isinf(p) ? 1.0 : std::exp2(-l1_norm(k) / p);
  return scale * coefficient_lp_norm(box, p);
}

/// A reconstruction holding a single level, for evaluating sum_s c_s M_{k,s}.
inline Reconstruction single_level(SplineOrder order, const Level& k, ShiftBox coefficients) {
  Reconstruction rec;
  rec.order = order;
  rec.delta.levels = {k};
  rec.surplus = {std::move(coefficients)};
  return rec;
}

/// log2 of Omega(2^k): (a, k) or alpha|k|_1 + beta|k|_inf.
inline double smoothness_weight_log2(const SmoothnessSpec& spec, std::span<const int> k) {
  if (spec.is_hybrid()) return spec.hybrid().alpha * l1_norm(k) + spec.hybrid().beta * linf_norm(k);
  const auto& a = spec.mixed().a;
  double v = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) v += a[i] * k[i];
  return v;
}

namespace detail {
inline double theta_sum(const std::vector<double>& terms, double theta) {
  double acc = 0.0;
  for (double t : terms) acc = std::isinf(theta) ? std::max(acc, t) : acc + std::pow(t, theta);
  return std::isinf(theta) ? acc : std::pow(acc, 1.0 / theta);
}
}  // namespace detail

/// Discrete B_3 quasi-norm over the stored levels with |k|_inf <= truncation:
/// ( sum_k (Omega(2^k) 2^{-|k|_1/p} ||c_k||_{p,k})^theta )^{1/theta}.
inline double besov_quasinorm_B3(const Reconstruction& rec, const SmoothnessSpec& spec, int truncation) {
  std::vector<double> terms;
  for (std::size_t l = 0; l < rec.delta.levels.size(); ++l) {
    const Level& k = rec.delta.levels[l];
    if (linf_norm(k) > truncation) continue;
    terms.push_back(std::exp2(smoothness_weight_log2(spec, k)) * level_norm(rec.surplus[l], k, spec.p));
  }
  return detail::theta_sum(terms, spec.theta);
}

/// Surrogate for ||f - R||_{B^gamma_{q,tau}}: the surpluses of f on `reference`
/// (a downward-closed strict superset of rec.delta) that R does not carry,
/// weighted by 2^{gamma |k|_inf} 2^{-|k|_1/q}.
inline double energy_error_surrogate(const Reconstruction& reference, const Reconstruction& rec, double gamma, double q,
                                     double tau) {
  if (!(gamma >= 0)) throw std::invalid_argument("energy surrogate requires gamma >= 0");
  bool strict = reference.delta.size() > rec.delta.size();
  for (const auto& k : rec.delta.levels) strict = strict && reference.delta.contains(k);
  if (!strict) throw std::invalid_argument("reference level set does not strictly contain the reconstruction's");
  std::vector<double> terms;
  for (std::size_t l = 0; l < reference.delta.levels.size(); ++l) {
    const Level& k = reference.delta.levels[l];
    const ShiftBox& ref = reference.surplus[l];
    if (!rec.delta.contains(k)) {
      terms.push_back(std::exp2(gamma * linf_norm(k)) * level_norm(ref, k, q));
      continue;
    }
    ShiftBox residual = rec.level_surplus(k);
    for (std::size_t i = 0; i < residual.values.size(); ++i) residual.values[i] = ref.values[i] - residual.values[i];
    terms.push_back(std::exp2(gamma * linf_norm(k)) * level_norm(residual, k, q));
  }
  return detail::theta_sum(terms, tau);
}

/// Builds the reference on the full box {|k|_inf <= truncation} and evaluates the surrogate.
inline double energy_error_surrogate(const Function& f, const Reconstruction& rec, double gamma, double q, double tau,
                                     int truncation) {
  const LevelSet box = comparison_sets(truncation, 1.0, Family::FullGrid, rec.dim());
  return energy_error_surrogate(build(f, box, rec.order), rec, gamma, q, tau);
}

// ---------------------------------------------------------------------------
// Rate fitting

struct RateFit {
  std::vector<std::pair<double, double>> points;  // (n, error)
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS deviation in log2(error)
};

/// Least-squares line through (log2 n, log2 error).
inline RateFit fit_rate(std::vector<std::pair<double, double>> points) {
  if (points.size() < 4) throw std::invalid_argument("rate fit needs at least 4 points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].first > 0) || !(points[i].second > 0)) throw std::invalid_argument("cannot fit log of nonpositive");
    if (i > 0 && !(points[i].first > points[i - 1].first)) throw std::invalid_argument("budgets must increase strictly");
  }
  const double m = static_cast<double>(points.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [n, e] : points) {
    const double x = std::log2(n), y = std::log2(e);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  RateFit fit;
  fit.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / m;
  double ss = 0;
  for (const auto& [n, e] : points) {
    const double r = std::log2(e) - (fit.intercept + fit.slope * std::log2(n));
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / m);
  fit.points = std::move(points);
  return fit;
}

// ---------------------------------------------------------------------------
// Test corpus

struct TestFunction {
  std::string label;
  Function f;
  double exact_integral = 0.0;
  std::string membership;
};

/// Integral of |t - 1/2|^lambda over [0, 1].
inline double kink_integral_1d(double lambda) { return std::pow(0.5, lambda) / (lambda + 1.0); }

inline double kink_factor(double t, double lambda) { return lambda == 0.0 ? 1.0 : std::pow(std::abs(t - 0.5), lambda); }

/// prod_i |x_i - 1/2|^{lambda_i}.
inline TestFunction kink_product(std::vector<double> lambda) {
  TestFunction t;
  std::string tag;
  double integral = 1.0;
  for (double l : lambda) {
    integral *= kink_integral_1d(l);
    tag += (tag.empty() ? "" : ",") + std::to_string(l).substr(0, 5);
  }
  t.label = "kink(" + tag + ")";
  t.exact_integral = integral;
  t.f = [lambda = std::move(lambda)](std::span<const double> x) {
    double v = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) v *= kink_factor(x[i], lambda[i]);
    return v;
  };
  return t;
}

/// sum_j prod_i |x_i - 1/2|^{lambda^j_i}.
inline TestFunction kink_sum(const std::vector<std::vector<double>>& lambdas) {
  TestFunction t;
  std::vector<Function> parts;
  t.label = "kinksum(";
  for (const auto& l : lambdas) {
    auto p = kink_product(l);
    t.exact_integral += p.exact_integral;
    t.label += p.label;
    parts.push_back(std::move(p.f));
  }
  t.label += ")";
  t.f = [parts = std::move(parts)](std::span<const double> x) {
    double v = 0.0;
    for (const auto& p : parts) v += p(x);
    return v;
  };
  return t;
}

inline TestFunction sine_product(int d) {
  TestFunction t;
  t.label = "sin";
  t.exact_integral = std::pow(2.0 / std::numbers::pi, d);
  t.membership = "analytic; lies in every class up to the order r";
  t.f = [](std::span<const double> x) {
    double v = 1.0;
    for (double xi : x) v *= std::sin(std::numbers::pi * xi);
    return v;
  };
  return t;
}

/// prod_i (1/2 + x_i^{r-1}): coordinate degree r - 1, reproduced exactly.
inline TestFunction polynomial_control(int d, int r) {
  TestFunction t;
  t.label = "poly";
  t.exact_integral = std::pow(0.5 + 1.0 / r, d);
  t.membership = "coordinate degree r-1; reproduced exactly";
  t.f = [r](std::span<const double> x) {
    double v = 1.0;
    for (double xi : x) v *= 0.5 + std::pow(xi, r - 1);
    return v;
  };
  return t;
}

enum class CorpusPurpose { Recovery, Integration };

/// Smoothness vectors a^j whose kinks span the target class: one vector for
/// mixed and beta >= 0 hybrid, d vectors alpha 1 + beta e_j for beta < 0.
inline std::vector<std::vector<double>> kink_smoothness(const SmoothnessSpec& spec) {
  const std::size_t d = static_cast<std::size_t>(spec.d);
  if (!spec.is_hybrid()) return {spec.mixed().a};
  const auto [alpha, beta] = spec.hybrid();
  if (beta >= 0) return {std::vector<double>(d, alpha + beta)};
  std::vector<std::vector<double>> out;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> a(d, alpha);
    a[j] += beta;
    out.push_back(std::move(a));
  }
  return out;
}

/// Kink exponents lambda = a - 1/p (recovery) or a - 1 (integration, where
/// the rate only needs B_{1,inf} membership), clipped into [0, r - 1).
inline TestFunction kink_for(const SmoothnessSpec& spec, CorpusPurpose purpose) {
  const double shift = purpose == CorpusPurpose::Recovery ? 1.0 / spec.p : 1.0;
  std::vector<std::vector<double>> lambdas;
  for (auto a : kink_smoothness(spec)) {
    for (double& v : a) v = std::clamp(v - shift, 0.0, spec.r - 1 - 1e-3);
    lambdas.push_back(std::move(a));
  }
  TestFunction t = lambdas.size() == 1 ? kink_product(lambdas[0]) : kink_sum(lambdas);
  t.membership = purpose == CorpusPurpose::Recovery ? "kink with exponents a - 1/p (theta = inf scale)"
                                                    : "kink with exponents a - 1 (B_{1,inf} scale)";
  return t;
}

/// Polynomial control, sine product and the class-matched kink.
inline std::vector<TestFunction> corpus(const SmoothnessSpec& spec, CorpusPurpose purpose = CorpusPurpose::Recovery) {
  return {polynomial_control(spec.d, spec.r), sine_product(spec.d), kink_for(spec, purpose)};
}

inline TestFunction corpus_function(const SmoothnessSpec& spec, const std::string& name,
                                    CorpusPurpose purpose = CorpusPurpose::Recovery) {
  if (name == "poly") return polynomial_control(spec.d, spec.r);
  if (name == "sin") return sine_product(spec.d);
  if (name == "kink") return kink_for(spec, purpose);
  throw SpecError("unknown corpus function '" + name + "' (expected poly, sin, kink)");
}

}  // namespace qsg
