// Quasi-interpolation on the unit cube: masks, Lagrange boundary extension,
// coefficient functionals a_{k,s} and c^(r)_{k,s}, level operators Q_k and
// their differences q_k.
//
// Every coefficient functional is a finite combination of samples on the
// dyadic nodes j 2^{-L} of one level L. UnivariateScheme expands them into
// sparse node rows once per level; the scalar routines (a_coeff,
// c_coeff_even, c_coeff_odd) evaluate the same functionals directly from a
// function handle and serve as the reference path.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include "qsg/bspline.hpp"
#include "qsg/dyadic.hpp"
#include "qsg/tensor.hpp"

namespace qsg {

/// Finite even sequence lambda(j), |j| <= mu, defining Lambda(f, s) = sum_j lambda(j) f(s - j).
struct Mask {
  SplineOrder order;
  int mu = 0;
  std::vector<double> lambda;  // lambda[j + mu]

  double operator()(int j) const { return (j < -mu || j > mu) ? 0.0 : lambda[static_cast<std::size_t>(j + mu)]; }

  /// ||Lambda|| = sum_j |lambda(j)|.
  double norm() const {
    double s = 0.0;
    for (double v : lambda) s += std::abs(v);
    return s;
  }
};

/// The explicit masks: point sampling for r = 1, 2; the quadric and cubic
/// three-point masks for r = 3, 4.
inline Mask mask_for_order(SplineOrder order) {
  switch (order.value()) {
    case 1:
    case 2:
      return {order, 0, {1.0}};
    case 3:
      return {order, 1, {-1.0 / 8.0, 10.0 / 8.0, -1.0 / 8.0}};
    case 4:
      return {order, 1, {-1.0 / 6.0, 8.0 / 6.0, -1.0 / 6.0}};
    default:
      throw std::invalid_argument("order out of range");
  }
}

/// Smallest level whose 2^L + 1 nodes support an (r-1)-degree Lagrange stencil.
inline int min_stencil_level(SplineOrder order) {
  int level = 0;
  while ((std::int64_t{1} << level) + 1 < order.value()) ++level;
  return level;
}

/// Level of the node grid used by the level-k functionals. Coarse levels
/// that cannot host an r-point stencil borrow the nodes of min_stencil_level.
inline int node_level(SplineOrder order, int k) { return std::max(k, min_stencil_level(order)); }

namespace detail {

// Lagrange basis weights for nodes 0..n-1 evaluated at integer u, each
// formed as one exact integer quotient.
inline std::vector<double> lagrange_weights(int n, std::int64_t u) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::int64_t num = 1, den = 1;
    for (int q = 0; q < n; ++q) {
      if (q == i) continue;
      num *= (u - q);
      den *= (i - q);
    }
    w[static_cast<std::size_t>(i)] = static_cast<double>(num) / static_cast<double>(den);
  }
  return w;
}

inline double binomial(int n, int j) {
  double b = 1.0;
  for (int i = 1; i <= j; ++i) b = b * (n - j + i) / i;
  return b;
}

// Accumulates (node, weight) pairs in node order.
class RowBuilder {
public:
  void add(int node, double w) { acc_[node] += w; }
  void add_row(const NodeRow& row, double scale, int index_factor) {
    for (std::size_t t = 0; t < row.size(); ++t) add(row.index[t] * index_factor, scale * row.weight[t]);
  }
  NodeRow finish() const {
    NodeRow row;
    for (const auto& [node, w] : acc_) {
      if (w == 0.0) continue;
      row.index.push_back(node);
      row.weight.push_back(w);
    }
    return row;
  }

private:
  std::map<int, double> acc_;
};

}  // namespace detail

/// The extension f̄_k of a univariate f beyond [0, 1] by the degree r-1
/// Lagrange polynomials U_k (through the r leftmost nodes) and V_k (through
/// the r rightmost nodes) of the dyadic grid of the stencil level.
class BoundaryExtendedSampler {
public:
  /// Extension on the level-k nodes; requires 2^k + 1 >= r.
  BoundaryExtendedSampler(Function1D f, SplineOrder order, int k) : BoundaryExtendedSampler(std::move(f), order, k, k) {
    if ((std::int64_t{1} << k) + 1 < order.value()) throw std::invalid_argument("insufficient nodes for extension");
  }

  /// Extension whose Lagrange stencils sit on the nodes of `stencil_level` >= k.
  BoundaryExtendedSampler(Function1D f, SplineOrder order, int k, int stencil_level)
      : f_(std::move(f)), order_(order), k_(k), stencil_level_(stencil_level) {
    if (k < 0 || stencil_level < k) throw std::invalid_argument("invalid extension level");
    if ((std::int64_t{1} << stencil_level) + 1 < order.value())
      throw std::invalid_argument("insufficient nodes for extension");
    const int r = order.value();
    const double h = std::ldexp(1.0, -stencil_level);
    const std::int64_t last = std::int64_t{1} << stencil_level;
    for (int i = 0; i < r; ++i) {
      left_nodes_.push_back(i * h);
      right_nodes_.push_back(static_cast<double>(last - r + 1 + i) * h);
    }
    for (int i = 0; i < r; ++i) {
      left_values_.push_back(f_(left_nodes_[i]));
      right_values_.push_back(f_(right_nodes_[i]));
    }
  }

  int level() const noexcept { return k_; }
  int stencil_level() const noexcept { return stencil_level_; }
  SplineOrder order() const noexcept { return order_; }

  double operator()(double x) const {
    if (x < 0.0) return interpolate(left_nodes_, left_values_, x);
    if (x > 1.0) return interpolate(right_nodes_, right_values_, x);
    return f_(x);
  }

private:
  static double interpolate(const std::vector<double>& nodes, const std::vector<double>& values, double x) {
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      double li = 1.0;
      for (std::size_t q = 0; q < nodes.size(); ++q)
        if (q != i) li *= (x - nodes[q]) / (nodes[i] - nodes[q]);
      sum += li * values[i];
    }
    return sum;
  }

  Function1D f_;
  SplineOrder order_;
  int k_ = 0;
  int stencil_level_ = 0;
  std::vector<double> left_nodes_, right_nodes_, left_values_, right_values_;
};

/// Extension on the level-k nodes (requires 2^k + 1 >= r).
inline BoundaryExtendedSampler extend(Function1D f, SplineOrder order, int k) {
  return BoundaryExtendedSampler(std::move(f), order, k);
}

/// a_{k,s}(f) = sum_{|j| <= mu} lambda(j) f̄_k(2^{-k}(s - j)).
inline double a_coeff(const BoundaryExtendedSampler& sampler, const Mask& mask, int k, int s) {
  double v = 0.0;
  for (int j = -mask.mu; j <= mask.mu; ++j) v += mask(j) * sampler(std::ldexp(static_cast<double>(s - j), -k));
  return v;
}

namespace detail {

inline BoundaryExtendedSampler operator_sampler(const Function1D& f, SplineOrder order, int k) {
  return BoundaryExtendedSampler(f, order, k, node_level(order, k));
}

}  // namespace detail

/// c^(r)_{k,s}(f) for even r: a_{k,s}(f) minus the level-(k-1) coefficients
/// refined onto level k.
inline double c_coeff_even(const Function1D& f, SplineOrder order, int k, int s) {
  if (!order.even()) throw std::invalid_argument("parity mismatch");
  if (!integer_shifts(order, k).contains(s)) throw std::out_of_range("inactive spline index");
  const Mask mask = mask_for_order(order);
  const int r = order.value();
  const double a = a_coeff(detail::operator_sampler(f, order, k), mask, k, s);
  if (k == 0) return a;
  const auto coarse = detail::operator_sampler(f, order, k - 1);
  const ShiftRange coarse_range = integer_shifts(order, k - 1);
  double refined = 0.0;
  for (int j = 0; j <= r; ++j) {
    const int twice_m = s + r / 2 - j;  // 2m + j - r/2 = s
    if (!detail::divisible(twice_m, 2)) continue;
    const int m = twice_m / 2;
    if (!coarse_range.contains(m)) continue;
    refined += detail::binomial(r, j) * a_coeff(coarse, mask, k - 1, m);
  }
  return a - std::ldexp(refined, -r + 1);
}

/// c^(r)_{k,s}(f) for odd r on the half-integer basis: even s carry the
/// level-k coefficients a_{k,s/2}, odd s carry the refined level-(k-1)
/// coefficients with negative sign, so that q_k = Q_k - Q_{k-1}.
inline double c_coeff_odd(const Function1D& f, SplineOrder order, int k, int s) {
  if (!order.odd()) throw std::invalid_argument("parity mismatch");
  if (!basis_shifts(order, k).contains(s)) throw std::out_of_range("inactive spline index");
  const Mask mask = mask_for_order(order);
  const int r = order.value();
  if (detail::divisible(s, 2)) return a_coeff(detail::operator_sampler(f, order, k), mask, k, s / 2);
  if (k == 0) return 0.0;
  const auto coarse = detail::operator_sampler(f, order, k - 1);
  const ShiftRange coarse_range = integer_shifts(order, k - 1);
  double refined = 0.0;
  for (int j = 0; j <= r; ++j) {
    const int four_m = s + r - 2 * j;  // 4m + 2j - r = s
    if (!detail::divisible(four_m, 4)) continue;
    const int m = four_m / 4;
    if (!coarse_range.contains(m)) continue;
    refined += detail::binomial(r, j) * a_coeff(coarse, mask, k - 1, m);
  }
  return -std::ldexp(refined, -r + 1);
}

/// Dispatches to c_coeff_even / c_coeff_odd.
inline double c_coeff(const Function1D& f, SplineOrder order, int k, int s) {
  return order.even() ? c_coeff_even(f, order, k, s) : c_coeff_odd(f, order, k, s);
}

/// Node-row expansion of the level-k functionals for one order.
struct LevelRows {
  int level = 0;
  int nodes_level = 0;         // rows index nodes j 2^{-nodes_level}
  ShiftRange a_range;          // J(k)
  std::vector<NodeRow> a_rows;
  ShiftRange c_range;          // J_r(k)
  std::vector<NodeRow> c_rows;
};

/// Univariate scheme for one order: builds and caches LevelRows per level.
/// Safe to query from several threads.
class UnivariateScheme {
public:
  explicit UnivariateScheme(SplineOrder order) : order_(order), mask_(mask_for_order(order)) {}

  SplineOrder order() const noexcept { return order_; }
  const Mask& mask() const noexcept { return mask_; }

  const LevelRows& rows(int k) const {
    if (k < 0) throw std::invalid_argument("negative level");
    std::lock_guard lock(mutex_);
    return rows_locked(k);
  }

private:
  const LevelRows& rows_locked(int k) const {
    if (auto it = cache_.find(k); it != cache_.end()) return *it->second;
    auto built = std::make_unique<LevelRows>(build(k));
    const LevelRows& ref = *built;
    cache_.emplace(k, std::move(built));
    return ref;
  }

  NodeRow a_row(int k, int L, int m) const {
    const int r = order_.value();
    const std::int64_t last = std::int64_t{1} << L;
    const std::int64_t scale = std::int64_t{1} << (L - k);
    detail::RowBuilder row;
    for (int j = -mask_.mu; j <= mask_.mu; ++j) {
      const double lam = mask_(j);
      const std::int64_t u = static_cast<std::int64_t>(m - j) * scale;
      if (u >= 0 && u <= last) {
        row.add(static_cast<int>(u), lam);
      } else if (u < 0) {
        const auto w = detail::lagrange_weights(r, u);
        for (int i = 0; i < r; ++i) row.add(i, lam * w[static_cast<std::size_t>(i)]);
      } else {
        const std::int64_t base = last - r + 1;
        const auto w = detail::lagrange_weights(r, u - base);
        for (int i = 0; i < r; ++i) row.add(static_cast<int>(base + i), lam * w[static_cast<std::size_t>(i)]);
      }
    }
    return row.finish();
  }

  LevelRows build(int k) const {
    const int r = order_.value();
    LevelRows out;
    out.level = k;
    out.nodes_level = node_level(order_, k);
    out.a_range = integer_shifts(order_, k);
    for (int m = out.a_range.lo; m <= out.a_range.hi; ++m) out.a_rows.push_back(a_row(k, out.nodes_level, m));
    out.c_range = basis_shifts(order_, k);

    const LevelRows* coarse = k > 0 ? &rows_locked(k - 1) : nullptr;
    const int factor = coarse ? 1 << (out.nodes_level - coarse->nodes_level) : 1;
    const double refine_scale = std::ldexp(1.0, -r + 1);
    auto coarse_row = [&](int m) -> const NodeRow* {
      if (!coarse || !coarse->a_range.contains(m)) return nullptr;
      return &coarse->a_rows[static_cast<std::size_t>(m - coarse->a_range.lo)];
    };

    for (int s = out.c_range.lo; s <= out.c_range.hi; ++s) {
      detail::RowBuilder row;
      if (order_.even()) {
        row.add_row(out.a_rows[static_cast<std::size_t>(s - out.a_range.lo)], 1.0, 1);
        if (coarse) {
          for (int j = 0; j <= r; ++j) {
            const int twice_m = s + r / 2 - j;
            if (!detail::divisible(twice_m, 2)) continue;
            if (const NodeRow* cr = coarse_row(twice_m / 2))
              row.add_row(*cr, -refine_scale * detail::binomial(r, j), factor);
          }
        }
      } else if (detail::divisible(s, 2)) {
        row.add_row(out.a_rows[static_cast<std::size_t>(s / 2 - out.a_range.lo)], 1.0, 1);
      } else if (coarse) {
        for (int j = 0; j <= r; ++j) {
          const int four_m = s + r - 2 * j;
          if (!detail::divisible(four_m, 4)) continue;
          if (const NodeRow* cr = coarse_row(four_m / 4))
            row.add_row(*cr, -refine_scale * detail::binomial(r, j), factor);
        }
      }
      out.c_rows.push_back(row.finish());
    }
    return out;
  }

  SplineOrder order_;
  Mask mask_;
  mutable std::mutex mutex_;
  mutable std::map<int, std::unique_ptr<LevelRows>> cache_;
};

/// Samples of f on the tensor node grid of level k (node_level per dimension).
inline std::vector<double> sample_level(SampleMemo& memo, const UnivariateScheme& scheme, std::span<const int> k,
                                        std::vector<int>& shape) {
  const std::size_t d = k.size();
  std::vector<int> levels(d);
  shape.assign(d, 0);
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) {
    levels[i] = node_level(scheme.order(), k[i]);
    shape[i] = (1 << levels[i]) + 1;
    total *= static_cast<std::size_t>(shape[i]);
  }
  std::vector<double> values;
  values.reserve(total);
  std::vector<int> idx(d, 0);
  DyadicPoint p;
  p.num.resize(d);
  do {
    for (std::size_t i = 0; i < d; ++i) p.num[i] = DyadicPoint::encode(idx[i], levels[i]);
    values.push_back(memo(p));
  } while (next_index(idx, shape));
  return values;
}

/// All coefficients of q_k(f): c^(r)_{k,s}(f) for s in J_r^d(k). The
/// univariate functional of the last dimension is applied first, the first
/// dimension last.
inline ShiftBox q_level(SampleMemo& memo, const UnivariateScheme& scheme, std::span<const int> k) {
  std::vector<int> shape;
  std::vector<double> values = sample_level(memo, scheme, k, shape);
  std::vector<int> lo(k.size());
  for (std::size_t axis = k.size(); axis-- > 0;) {
    const LevelRows& rows = scheme.rows(k[axis]);
    values = apply_along_axis(values, shape, axis, rows.c_rows);
    lo[axis] = rows.c_range.lo;
  }
  ShiftBox box(lo, shape);
  box.values = std::move(values);
  return box;
}

inline ShiftBox q_level(const Function& f, SplineOrder order, std::span<const int> k) {
  SampleMemo memo(f);
  UnivariateScheme scheme(order);
  return q_level(memo, scheme, k);
}

/// Coefficients a_{k,s}(f), s in J^d(k), of the level operator Q_k.
inline ShiftBox a_level(SampleMemo& memo, const UnivariateScheme& scheme, std::span<const int> k) {
  std::vector<int> shape;
  std::vector<double> values = sample_level(memo, scheme, k, shape);
  std::vector<int> lo(k.size());
  for (std::size_t axis = k.size(); axis-- > 0;) {
    const LevelRows& rows = scheme.rows(k[axis]);
    values = apply_along_axis(values, shape, axis, rows.a_rows);
    lo[axis] = rows.a_range.lo;
  }
  ShiftBox box(lo, shape);
  box.values = std::move(values);
  return box;
}

/// Q_k(f)(x) = sum_s a_{k,s}(f) M_{k,s}(x) on integer translates.
inline double evaluate_Q(const ShiftBox& a, SplineOrder order, std::span<const int> k, std::span<const double> x) {
  std::vector<ActiveValues> active(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) active[i] = active_integer_values_1d(order, k[i], x[i]);
  return contract_box(a, active);
}

/// q_k(f)(x) = sum_s c_{k,s}(f) M^(r)_{k,s}(x).
inline double evaluate_q(const ShiftBox& c, SplineOrder order, std::span<const int> k, std::span<const double> x) {
  std::vector<ActiveValues> active(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) active[i] = active_values_1d(order, k[i], x[i]);
  return contract_box(c, active);
}

/// Q_k(f)(x) computed directly from the tensor coefficients a_{k,s}.
inline double apply_Q(const Function& f, SplineOrder order, std::span<const int> k, std::span<const double> x) {
  SampleMemo memo(f);
  UnivariateScheme scheme(order);
  return evaluate_Q(a_level(memo, scheme, k), order, k, x);
}

/// Q_k(f)(x) computed as the telescoping sum over k' <= k of q_{k'}(f)(x).
inline double apply_Q_telescoped(const Function& f, SplineOrder order, std::span<const int> k,
                                 std::span<const double> x) {
  SampleMemo memo(f);
  UnivariateScheme scheme(order);
  std::vector<int> kp(k.size(), 0);
  std::vector<int> ext(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) ext[i] = k[i] + 1;
  double sum = 0.0;
  do {
    sum += evaluate_q(q_level(memo, scheme, kp), order, kp, x);
  } while (next_index(kp, ext));
  return sum;
}

}  // namespace qsg
