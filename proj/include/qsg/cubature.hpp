// Cubature induced by the recovery operator: I_n(f) = integral of R_Delta(f).
#pragma once

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include "qsg/bspline.hpp"
#include "qsg/dyadic.hpp"
#include "qsg/grids.hpp"
#include "qsg/parallel.hpp"
#include "qsg/quasi_interp.hpp"
#include "qsg/recovery.hpp"
#include "qsg/tensor.hpp"

namespace qsg {

namespace detail {

/// Integrals of M^(r)_{k,s} over [0,1] for s in J_r(k).
inline std::vector<double> basis_integrals(SplineOrder order, int k) {
  const ShiftRange range = basis_shifts(order, k);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(range.size()));
  for (int s = range.lo; s <= range.hi; ++s) out.push_back(integral_basis_1d(order, k, s));
  return out;
}

}  // namespace detail

/// Exact integral of the reconstruction: sum c_{k,s} * integral of M^(r)_{k,s}.
inline double integrate_reconstruction(const Reconstruction& rec) {
  const std::size_t d = static_cast<std::size_t>(rec.dim());
  const int top = rec.delta.max_level();
  std::vector<std::vector<double>> per_level;
  for (int k = 0; k <= top; ++k) per_level.push_back(detail::basis_integrals(rec.order, k));
  double total = 0.0;
  for (std::size_t l = 0; l < rec.delta.levels.size(); ++l) {
    const Level& k = rec.delta.levels[l];
    const ShiftBox& box = rec.surplus[l];
    // Contract the box one axis at a time, last axis first.
    std::vector<double> values = box.values;
    std::vector<int> shape = box.extent;
    for (std::size_t axis = d; axis-- > 0;) {
      const auto& w = per_level[static_cast<std::size_t>(k[axis])];
      NodeRow row;
      for (std::size_t s = 0; s < w.size(); ++s) {
        row.index.push_back(static_cast<int>(s));
        row.weight.push_back(w[s]);
      }
      values = apply_along_axis(values, shape, axis, {row});
    }
    total += values[0];
  }
  return total;
}

/// Weights lambda_j on the distinct sample points, in increasing point order.
struct CubatureRule {
  SplineOrder order{2};
  LevelSet delta;
  std::vector<DyadicPoint> points;
  std::vector<double> weights;
  std::int64_t budget = 0;

  std::size_t size() const noexcept { return points.size(); }

  double weight_sum() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
};

/// Node weights of one level in one dimension: w[j] = sum_s I(k, s) c_row_s[j]
/// over the nodes j 2^{-L} of the level's node grid.
inline std::vector<double> node_weights_1d(const UnivariateScheme& scheme, int k) {
  const LevelRows& rows = scheme.rows(k);
  const auto integrals = detail::basis_integrals(scheme.order(), k);
  std::vector<double> w(static_cast<std::size_t>((1 << rows.nodes_level) + 1), 0.0);
  for (std::size_t s = 0; s < rows.c_rows.size(); ++s) {
    const NodeRow& row = rows.c_rows[s];
    for (std::size_t t = 0; t < row.size(); ++t) w[static_cast<std::size_t>(row.index[t])] += integrals[s] * row.weight[t];
  }
  return w;
}

/// Pushes the functional f -> integral of R_Delta(f) down to the sample points.
/// Levels are expanded in parallel and merged in level order, so the result
/// does not depend on the thread count.
inline CubatureRule assemble_weights(const LevelSet& delta, SplineOrder order, unsigned threads = 0) {
  if (delta.levels.empty()) throw std::invalid_argument("empty level set");
  UnivariateScheme scheme(order);
  const std::size_t d = static_cast<std::size_t>(delta.dim());
  struct Contribution {
    std::vector<DyadicPoint> points;
    std::vector<double> weights;
  };
  std::vector<Contribution> parts(delta.levels.size());
  parallel_for(delta.levels.size(), threads, [&](std::size_t l) {
    const Level& k = delta.levels[l];
    std::vector<std::vector<double>> w(d);
    std::vector<int> levels(d), shape(d);
    for (std::size_t i = 0; i < d; ++i) {
      w[i] = node_weights_1d(scheme, k[i]);
      levels[i] = node_level(order, k[i]);
      shape[i] = static_cast<int>(w[i].size());
    }
    Contribution& part = parts[l];
    std::vector<int> idx(d, 0);
    do {
      double weight = 1.0;
      for (std::size_t i = 0; i < d && weight != 0.0; ++i) weight *= w[i][static_cast<std::size_t>(idx[i])];
      if (weight == 0.0) continue;
      DyadicPoint p;
      p.num.resize(d);
      for (std::size_t i = 0; i < d; ++i) p.num[i] = DyadicPoint::encode(idx[i], levels[i]);
      part.points.push_back(std::move(p));
      part.weights.push_back(weight);
    } while (next_index(idx, shape));
  });

  std::unordered_map<DyadicPoint, double, DyadicPointHash> acc;
  for (const auto& part : parts)
    for (std::size_t i = 0; i < part.points.size(); ++i) acc[part.points[i]] += part.weights[i];

  CubatureRule rule;
  rule.order = order;
  rule.delta = delta;
  rule.budget = budget(delta);
  rule.points.reserve(acc.size());
  for (const auto& [p, w] : acc) rule.points.push_back(p);
  std::sort(rule.points.begin(), rule.points.end());
  rule.weights.reserve(rule.points.size());
  for (const auto& p : rule.points) rule.weights.push_back(acc.at(p));
  return rule;
}

/// sum_j lambda_j f(x^j), summed in point order.
inline double apply_rule(const CubatureRule& rule, const Function& f, unsigned threads = 0) {
  std::vector<double> values(rule.size());
  constexpr std::size_t chunk = 512;
  parallel_for((rule.size() + chunk - 1) / chunk, threads, [&](std::size_t c) {
    const std::size_t end = std::min(rule.size(), (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      const auto x = rule.points[i].to_vector();
      values[i] = f(x);
    }
  });
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) sum += rule.weights[i] * values[i];
  return sum;
}

/// CSV with header x_1,...,x_d,weight; coordinates exact, weights to 17 digits.
inline void write_rule_csv(std::ostream& os, const CubatureRule& rule) {
  const std::size_t d = static_cast<std::size_t>(rule.delta.dim());
  for (std::size_t i = 0; i < d; ++i) os << "x_" << (i + 1) << ',';
  os << "weight\n";
  char buf[40];
  for (std::size_t j = 0; j < rule.size(); ++j) {
    for (std::size_t i = 0; i < d; ++i) os << dyadic_to_decimal(rule.points[j].num[i]) << ',';
    std::snprintf(buf, sizeof buf, "%.17g", rule.weights[j]);
    os << buf << '\n';
  }
}

}  // namespace qsg
