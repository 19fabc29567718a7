// Exact dyadic points in [0,1]^d and a memo table of function samples.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace qsg {

/// Finest dyadic level representable by DyadicPoint.
inline constexpr int kMaxDyadicLevel = 40;

/// A point whose coordinates are j / 2^L, stored as numerators over
/// 2^kMaxDyadicLevel so that coincident points from different levels compare equal.
struct DyadicPoint {
  std::vector<std::uint64_t> num;

  static std::uint64_t encode(std::int64_t index, int level) {
    if (level < 0 || level > kMaxDyadicLevel) throw std::out_of_range("dyadic level out of range");
    if (index < 0 || index > (std::int64_t{1} << level)) throw std::out_of_range("dyadic index outside [0,1]");
    return static_cast<std::uint64_t>(index) << (kMaxDyadicLevel - level);
  }

  std::size_t dim() const noexcept { return num.size(); }

  double coord(std::size_t i) const { return std::ldexp(static_cast<double>(num[i]), -kMaxDyadicLevel); }

  std::vector<double> to_vector() const {
    std::vector<double> x(num.size());
    for (std::size_t i = 0; i < num.size(); ++i) x[i] = coord(i);
    return x;
  }

  friend bool operator==(const DyadicPoint&, const DyadicPoint&) = default;
  friend auto operator<=>(const DyadicPoint&, const DyadicPoint&) = default;
};

struct DyadicPointHash {
  std::size_t operator()(const DyadicPoint& p) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (std::uint64_t v : p.num) {
      h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

/// Exact decimal expansion of a dyadic coordinate (always terminates).
inline std::string dyadic_to_decimal(std::uint64_t numerator) {
  const std::uint64_t denom = std::uint64_t{1} << kMaxDyadicLevel;
  std::string out = std::to_string(numerator / denom);
  std::uint64_t rem = numerator % denom;
  if (rem == 0) return out;
  out.push_back('.');
  while (rem != 0) {
    rem *= 10;
    out.push_back(static_cast<char>('0' + rem / denom));
    rem %= denom;
  }
  return out;
}

using Function = std::function<double(std::span<const double>)>;
using Function1D = std::function<double(double)>;

/// Memoized sampler: each distinct dyadic point is evaluated at most once.
/// Lookups and inserts are serialized so levels may be sampled from several threads.
class SampleMemo {
public:
  explicit SampleMemo(Function f) : f_(std::move(f)) {}

  double operator()(const DyadicPoint& p) {
    {
      std::lock_guard lock(mutex_);
      if (auto it = table_.find(p); it != table_.end()) return it->second;
    }
    const std::vector<double> x = p.to_vector();
    const double v = f_(x);
    std::lock_guard lock(mutex_);
    table_.emplace(p, v);
    return v;
  }

  std::size_t evaluations() const {
    std::lock_guard lock(mutex_);
    return table_.size();
  }

private:
  Function f_;
  mutable std::mutex mutex_;
  std::unordered_map<DyadicPoint, double, DyadicPointHash> table_;
};

}  // namespace qsg
