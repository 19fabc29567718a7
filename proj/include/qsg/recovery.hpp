// The sampling recovery operator R_Delta(f) = sum_{k in Delta} q_k(f).
#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qsg/bspline.hpp"
#include "qsg/dyadic.hpp"
#include "qsg/grids.hpp"
#include "qsg/parallel.hpp"
#include "qsg/quasi_interp.hpp"
#include "qsg/tensor.hpp"

namespace qsg {

inline constexpr int kReconstructionFormatVersion = 1;

/// Surpluses c^(r)_{k,s}(f) for every k in Delta, stored per level as a dense
/// box over J_r^d(k) in the order of delta.levels.
struct Reconstruction {
  SplineOrder order{2};
  LevelSet delta;
  std::vector<ShiftBox> surplus;
  std::int64_t sample_budget = 0;    // distinct function evaluations actually used
  std::int64_t declared_budget = 0;  // sum_k prod_j (2^{k_j} + 1)

  int dim() const { return delta.dim(); }

  double evaluate(std::span<const double> x) const {
    const std::size_t d = static_cast<std::size_t>(dim());
    if (x.size() != d) throw std::invalid_argument("evaluation point has wrong dimension");
    for (double v : x)
      if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("evaluation point outside domain");
    // Active basis values per dimension and level value, shared by all k in Delta.
    const int top = delta.max_level();
    std::vector<ActiveValues> table(d * static_cast<std::size_t>(top + 1));
    for (std::size_t i = 0; i < d; ++i)
      for (int k = 0; k <= top; ++k) table[i * static_cast<std::size_t>(top + 1) + static_cast<std::size_t>(k)] = active_values_1d(order, k, x[i]);
    std::vector<ActiveValues> active(d);
    double sum = 0.0;
    for (std::size_t l = 0; l < delta.levels.size(); ++l) {
      const Level& k = delta.levels[l];
      for (std::size_t i = 0; i < d; ++i) active[i] = table[i * static_cast<std::size_t>(top + 1) + static_cast<std::size_t>(k[i])];
      sum += contract_box(surplus[l], active);
    }
    return sum;
  }

  /// Elementwise evaluate; `points` holds consecutive d-tuples.
  std::vector<double> evaluate_batch(std::span<const double> points, unsigned threads = 0) const {
    const std::size_t d = static_cast<std::size_t>(dim());
    if (d == 0 || points.size() % d != 0) throw std::invalid_argument("point buffer is not a multiple of the dimension");
    const std::size_t n = points.size() / d;
    std::vector<double> out(n);
    constexpr std::size_t chunk = 256;
    parallel_for((n + chunk - 1) / chunk, threads, [&](std::size_t c) {
      const std::size_t end = std::min(n, (c + 1) * chunk);
      for (std::size_t i = c * chunk; i < end; ++i) out[i] = evaluate(points.subspan(i * d, d));
    });
    return out;
  }

  std::vector<double> evaluate_batch(const std::vector<std::vector<double>>& points, unsigned threads = 0) const {
    std::vector<double> flat;
    flat.reserve(points.size() * static_cast<std::size_t>(dim()));
    for (const auto& p : points) {
      if (p.size() != static_cast<std::size_t>(dim())) throw std::invalid_argument("evaluation point has wrong dimension");
      flat.insert(flat.end(), p.begin(), p.end());
    }
    if (flat.empty()) return {};
    return evaluate_batch(std::span<const double>(flat), threads);
  }

  /// Surplus box of level k (throws if k is not in Delta).
  const ShiftBox& level_surplus(std::span<const int> k) const {
    const Level key(k.begin(), k.end());
    const auto it = std::lower_bound(delta.levels.begin(), delta.levels.end(), key);
    if (it == delta.levels.end() || *it != key) throw std::out_of_range("level not in reconstruction");
    return surplus[static_cast<std::size_t>(it - delta.levels.begin())];
  }
};

/// R on the uniform lattice {j / (per_dim - 1)}^d, row-major with the last
/// axis fastest. Each level is contracted axis by axis against the basis
/// values at the lattice coordinates, so the cost per level is O(r N^d).
inline std::vector<double> evaluate_on_lattice(const Reconstruction& rec, std::int64_t per_dim) {
  if (per_dim < 2) throw std::invalid_argument("lattice needs at least 2 points per dimension");
  const std::size_t d = static_cast<std::size_t>(rec.dim());
  const int top = rec.delta.max_level();
  const double h = 1.0 / static_cast<double>(per_dim - 1);
  // rows[k][j]: basis values at x_j as a sparse row over J_r(k), indexed from its low end.
  std::vector<std::vector<NodeRow>> rows(static_cast<std::size_t>(top + 1));
  for (int k = 0; k <= top; ++k) {
    const ShiftRange range = basis_shifts(rec.order, k);
    auto& rk = rows[static_cast<std::size_t>(k)];
    rk.resize(static_cast<std::size_t>(per_dim));
    for (std::int64_t j = 0; j < per_dim; ++j) {
      const ActiveValues act = active_values_1d(rec.order, k, static_cast<double>(j) * h);
      NodeRow& row = rk[static_cast<std::size_t>(j)];
      for (int t = 0; t < act.count; ++t) {
        const int s = act.first + t;
        if (!range.contains(s) || act.values[static_cast<std::size_t>(t)] == 0.0) continue;
        row.index.push_back(s - range.lo);
        row.weight.push_back(act.values[static_cast<std::size_t>(t)]);
      }
    }
  }
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) total *= static_cast<std::size_t>(per_dim);
  std::vector<double> out(total, 0.0);
  for (std::size_t l = 0; l < rec.delta.levels.size(); ++l) {
    const Level& k = rec.delta.levels[l];
    std::vector<double> values = rec.surplus[l].values;
    std::vector<int> shape = rec.surplus[l].extent;
    for (std::size_t axis = d; axis-- > 0;) values = apply_along_axis(values, shape, axis, rows[static_cast<std::size_t>(k[axis])]);
    for (std::size_t i = 0; i < total; ++i) out[i] += values[i];
  }
  return out;
}

/// Builds R_Delta(f) from samples of f, parallel over levels.
inline Reconstruction build(SampleMemo& memo, const UnivariateScheme& scheme, const LevelSet& delta,
                            unsigned threads = 0) {
  if (delta.levels.empty()) throw std::invalid_argument("empty level set");
  Reconstruction rec;
  rec.order = scheme.order();
  rec.delta = delta;
  rec.surplus.resize(delta.levels.size());
  parallel_for(delta.levels.size(), threads,
               [&](std::size_t l) { rec.surplus[l] = q_level(memo, scheme, delta.levels[l]); });
  rec.sample_budget = static_cast<std::int64_t>(memo.evaluations());
  rec.declared_budget = budget(delta);
  return rec;
}

inline Reconstruction build(const Function& f, const LevelSet& delta, SplineOrder order, unsigned threads = 0) {
  SampleMemo memo(f);
  UnivariateScheme scheme(order);
  return build(memo, scheme, delta, threads);
}

// ---------------------------------------------------------------------------
// JSON dump

inline nlohmann::json to_json(const Reconstruction& rec) {
  nlohmann::json j;
  j["format"] = "qsg-reconstruction";
  j["version"] = kReconstructionFormatVersion;
  j["r"] = rec.order.value();
  j["d"] = rec.dim();
  j["family"] = to_string(rec.delta.family);
  j["xi"] = rec.delta.xi;
  j["functional"] = {{"w", rec.delta.functional.w}, {"l1", rec.delta.functional.l1}, {"linf", rec.delta.functional.linf}};
  j["sample_budget"] = rec.sample_budget;
  j["declared_budget"] = rec.declared_budget;
  auto& levels = j["levels"] = nlohmann::json::array();
  for (std::size_t l = 0; l < rec.delta.levels.size(); ++l) {
    const ShiftBox& box = rec.surplus[l];
    levels.push_back({{"k", rec.delta.levels[l]}, {"lo", box.lo}, {"extent", box.extent}, {"c", box.values}});
  }
  return j;
}

inline Reconstruction reconstruction_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "qsg-reconstruction") throw std::runtime_error("not a reconstruction dump");
    const int version = j.at("version").get<int>();
    if (version != kReconstructionFormatVersion)
      throw std::runtime_error("unsupported reconstruction dump version " + std::to_string(version));
    Reconstruction rec;
    rec.order = SplineOrder(j.at("r").get<int>());
    rec.delta.family = family_from_string(j.at("family").get<std::string>());
    rec.delta.xi = j.at("xi").get<double>();
    const auto& fn = j.at("functional");
    rec.delta.functional.w = fn.at("w").get<std::vector<double>>();
    rec.delta.functional.l1 = fn.at("l1").get<double>();
    rec.delta.functional.linf = fn.at("linf").get<double>();
    rec.sample_budget = j.at("sample_budget").get<std::int64_t>();
    rec.declared_budget = j.at("declared_budget").get<std::int64_t>();
    const std::size_t d = j.at("d").get<std::size_t>();
    for (const auto& lv : j.at("levels")) {
      Level k = lv.at("k").get<Level>();
      ShiftBox box(lv.at("lo").get<std::vector<int>>(), lv.at("extent").get<std::vector<int>>());
      auto c = lv.at("c").get<std::vector<double>>();
      if (k.size() != d || box.lo.size() != d || c.size() != box.values.size())
        throw std::runtime_error("inconsistent level entry");
      box.values = std::move(c);
      rec.delta.levels.push_back(std::move(k));
      rec.surplus.push_back(std::move(box));
    }
    if (!std::is_sorted(rec.delta.levels.begin(), rec.delta.levels.end()))
      throw std::runtime_error("levels are not sorted");
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed reconstruction dump: ") + e.what());
  }
}

inline void save_reconstruction(std::ostream& os, const Reconstruction& rec) { os << to_json(rec).dump() << '\n'; }

inline Reconstruction load_reconstruction(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed reconstruction dump: ") + e.what());
  }
  return reconstruction_from_json(j);
}

}  // namespace qsg
