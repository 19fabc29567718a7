// Centered cardinal B-splines of order 1..4, their dyadic dilates and
// tensor products on the unit cube.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace qsg {

/// Order r of a centered cardinal B-spline (piecewise degree r-1, support [-r/2, r/2]).
class SplineOrder {
public:
  constexpr SplineOrder() = default;
  explicit SplineOrder(int r) : r_(r) {
    if (r < 1 || r > 4) throw std::invalid_argument("order out of range");
  }
  constexpr int value() const noexcept { return r_; }
  constexpr bool odd() const noexcept { return (r_ & 1) != 0; }
  constexpr bool even() const noexcept { return !odd(); }
  friend constexpr bool operator==(SplineOrder, SplineOrder) = default;

private:
  int r_ = 2;
};

/// Inclusive integer range [lo, hi].
struct ShiftRange {
  int lo = 0;
  int hi = -1;
  constexpr int size() const noexcept { return hi - lo + 1; }
  constexpr bool contains(int s) const noexcept { return s >= lo && s <= hi; }
};

/// Level vector k and shift vector s of a tensor spline M^(r)_{k,s}.
struct TensorSplineIndex {
  std::vector<int> k;
  std::vector<int> s;
};

namespace detail {

inline std::int64_t pow2(int k) { return std::int64_t{1} << k; }

inline int floor_div(int a, int b) {
  int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline bool divisible(int a, int b) { return a % b == 0; }

// Gauss-Legendre nodes and weights on [-1, 1] for one and two points.
inline constexpr std::array<double, 2> kGauss2Nodes{-0.57735026918962576451, 0.57735026918962576451};

}  // namespace detail

/// Value of the centered B-spline M of order r at t. For r = 1 the support
/// is the half-open interval [-1/2, 1/2).
inline double eval_centered(SplineOrder order, double t) {
  const double a = std::abs(t);
  switch (order.value()) {
    case 1:
      return (t >= -0.5 && t < 0.5) ? 1.0 : 0.0;
    case 2:
      return a < 1.0 ? 1.0 - a : 0.0;
    case 3:
      if (a < 0.5) return 0.75 - a * a;
      if (a < 1.5) {
        const double u = 1.5 - a;
        return 0.5 * u * u;
      }
      return 0.0;
    case 4:
      if (a < 1.0) return 2.0 / 3.0 - a * a + 0.5 * a * a * a;
      if (a < 2.0) {
        const double u = 2.0 - a;
        return u * u * u / 6.0;
      }
      return 0.0;
    default:
      throw std::invalid_argument("order out of range");
  }
}

/// Convenience overload taking the raw order.
inline double eval_centered(int r, double t) { return eval_centered(SplineOrder(r), t); }

/// Shift range J(k) = {s : -r/2 < s < 2^k + r/2} of integer translates
/// M(2^k x - s) that do not vanish on [0, 1].
inline ShiftRange integer_shifts(SplineOrder order, int k) {
  const int half = (order.value() - 1) / 2;
  return {-half, static_cast<int>(detail::pow2(k)) + half};
}

/// Shift range J_r(k) of the basis M^(r)_{k,s} used by the surplus
/// representation: J(k) for even r, {s : -r < s < 2^{k+1} + r} for odd r.
inline ShiftRange basis_shifts(SplineOrder order, int k) {
  if (order.even()) return integer_shifts(order, k);
  const int r = order.value();
  return {-r + 1, static_cast<int>(detail::pow2(k + 1)) + r - 1};
}

/// Per-dimension ranges realizing J_r^d(k).
inline std::vector<ShiftRange> active_shifts(SplineOrder order, std::span<const int> k) {
  std::vector<ShiftRange> out;
  out.reserve(k.size());
  for (int ki : k) {
    if (ki < 0) throw std::invalid_argument("negative level");
    out.push_back(basis_shifts(order, ki));
  }
  return out;
}

/// Translation of the basis spline in units of the dilated variable:
/// s for even order, s/2 for odd order.
inline double basis_offset(SplineOrder order, int s) {
  return order.even() ? static_cast<double>(s) : 0.5 * static_cast<double>(s);
}

/// Univariate M^(r)_{k,s}(x) without range checks.
inline double eval_basis_1d(SplineOrder order, int k, int s, double x) {
  return eval_centered(order, std::ldexp(x, k) - basis_offset(order, s));
}

/// Tensor spline M^(r)_{k,s}(x) = prod_i M(2^{k_i} x_i - s_i) (even r) or
/// prod_i M(2^{k_i} x_i - s_i / 2) (odd r).
inline double eval_dilated(SplineOrder order, const TensorSplineIndex& idx, std::span<const double> x) {
  if (idx.k.size() != idx.s.size() || idx.k.size() != x.size())
    throw std::invalid_argument("dimension mismatch");
  double v = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (idx.k[i] < 0 || !basis_shifts(order, idx.k[i]).contains(idx.s[i]))
      throw std::out_of_range("inactive spline index");
    v *= eval_basis_1d(order, idx.k[i], idx.s[i], x[i]);
  }
  return v;
}

/// Integral of M over [a, b] computed piecewise between knots with
/// ceil(r/2)-point Gauss-Legendre, which is exact on every polynomial piece.
inline double integral_centered(SplineOrder order, double a, double b) {
  const int r = order.value();
  const double half = 0.5 * r;
  a = std::max(a, -half);
  b = std::min(b, half);
  if (b <= a) return 0.0;
  double total = 0.0;
  for (int j = 0; j < r; ++j) {
    const double lo = std::max(a, -half + j);
    const double hi = std::min(b, -half + j + 1);
    if (hi <= lo) continue;
    const double mid = 0.5 * (lo + hi);
    const double rad = 0.5 * (hi - lo);
    if (r <= 2) {
      total += 2.0 * rad * eval_centered(order, mid);
    } else {
      for (double node : detail::kGauss2Nodes) total += rad * eval_centered(order, mid + rad * node);
    }
  }
  return total;
}

/// Clipped univariate integral of M^(r)_{k,s} over [0, 1].
inline double integral_basis_1d(SplineOrder order, int k, int s) {
  const double off = basis_offset(order, s);
  const double scale = static_cast<double>(detail::pow2(k));
  return integral_centered(order, -off, scale - off) / scale;
}

/// Exact integral of M^(r)_{k,s} over [0, 1]^d as a product of clipped 1-D integrals.
inline double integral_on_cube(SplineOrder order, const TensorSplineIndex& idx) {
  if (idx.k.size() != idx.s.size()) throw std::invalid_argument("dimension mismatch");
  double v = 1.0;
  for (std::size_t i = 0; i < idx.k.size(); ++i) {
    if (idx.k[i] < 0 || !basis_shifts(order, idx.k[i]).contains(idx.s[i]))
      throw std::out_of_range("inactive spline index");
    v *= integral_basis_1d(order, idx.k[i], idx.s[i]);
  }
  return v;
}

/// Basis values at a point for one dimension and level (zeros possible at the ends).
struct ActiveValues {
  int first = 0;  // shift of values[0]
  int count = 0;
  std::array<double, 12> values{};
};

namespace detail {

// Candidate shifts bracket the support (t - r/2, t + r/2] of the translate;
// `per_unit` is the number of shifts per unit of t (1 integer, 2 half-integer).
inline ActiveValues collect_active(SplineOrder order, double t, ShiftRange range, int per_unit) {
  const double half = 0.5 * order.value();
  int lo = static_cast<int>(std::floor(per_unit * (t - half)));
  int hi = static_cast<int>(std::ceil(per_unit * (t + half)));
  lo = std::max(lo, range.lo);
  hi = std::min(hi, range.hi);
  ActiveValues out;
  out.first = lo;
  for (int s = lo; s <= hi && out.count < static_cast<int>(out.values.size()); ++s)
    out.values[out.count++] = eval_centered(order, t - static_cast<double>(s) / per_unit);
  return out;
}

}  // namespace detail

/// Collects M^(r)_{k,s}(x) for every s in J_r(k) that can be nonzero at x.
inline ActiveValues active_values_1d(SplineOrder order, int k, double x) {
  return detail::collect_active(order, std::ldexp(x, k), basis_shifts(order, k), order.even() ? 1 : 2);
}

/// Collects M(2^k x - s) for every s in J(k) (integer translates, any order).
inline ActiveValues active_integer_values_1d(SplineOrder order, int k, double x) {
  return detail::collect_active(order, std::ldexp(x, k), integer_shifts(order, k), 1);
}

}  // namespace qsg
