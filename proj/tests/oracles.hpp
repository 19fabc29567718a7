// Independent reference computations used only by the tests.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

namespace qsg::oracle {

/// Cardinal B-spline of order r with knots 0, 1, ..., r by the Cox-de Boor
/// recursion, right-continuous (support [0, r)).
inline double cox_de_boor(int r, double t) {
  if (r == 1) return (t >= 0.0 && t < 1.0) ? 1.0 : 0.0;
  return (t * cox_de_boor(r - 1, t) + (r - t) * cox_de_boor(r - 1, t - 1.0)) / (r - 1);
}

/// Centered B-spline through the recursion.
inline double centered(int r, double t) { return cox_de_boor(r, t + 0.5 * r); }

/// Classical Faber-Schauder hierarchical surpluses on level k for a 1-D
/// function: f(0), f(1) at k = 0; f(x_s) - (f(x_{s-1}) + f(x_{s+1})) / 2 on
/// odd s and 0 on even s for k > 0.
inline std::vector<double> faber_surpluses(const std::function<double(double)>& f, int k) {
  const int n = 1 << k;
  const double h = 1.0 / n;
  std::vector<double> out(static_cast<std::size_t>(n + 1), 0.0);
  if (k == 0) {
    out[0] = f(0.0);
    out[1] = f(1.0);
    return out;
  }
  for (int s = 1; s < n; s += 2) out[static_cast<std::size_t>(s)] = f(s * h) - 0.5 * (f((s - 1) * h) + f((s + 1) * h));
  return out;
}

/// All k in the box [0, bound]^d with phi(k) <= xi, found by exhaustive scan.
inline std::vector<std::vector<int>> brute_force_levels(int d, int bound, const std::function<double(std::span<const int>)>& phi,
                                                        double xi) {
  std::vector<std::vector<int>> out;
  std::vector<int> k(static_cast<std::size_t>(d), 0);
  while (true) {
    if (phi(k) <= xi + 1e-9) out.push_back(k);
    int i = d - 1;
    while (i >= 0 && ++k[static_cast<std::size_t>(i)] > bound) k[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) break;
  }
  return out;
}

/// Budget sum_k prod_j (2^{k_j} + 1) of a list of levels.
inline std::int64_t budget_of(const std::vector<std::vector<int>>& levels) {
  std::int64_t n = 0;
  for (const auto& k : levels) {
    std::int64_t p = 1;
    for (int v : k) p *= (std::int64_t{1} << v) + 1;
    n += p;
  }
  return n;
}

/// A deterministic pseudo-random function whose values at every point are
/// integers divided by 1024, so that sums of a few halved values stay exact.
inline std::function<double(double)> dyadic_random_function(std::uint64_t seed) {
  return [seed](double x) {
    std::uint64_t h = seed * 0x9e3779b97f4a7c15ull ^ static_cast<std::uint64_t>(std::llround(std::ldexp(x, 30)));
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    return static_cast<double>(static_cast<std::int64_t>(h % 2049) - 1024) / 1024.0;
  };
}

}  // namespace qsg::oracle
