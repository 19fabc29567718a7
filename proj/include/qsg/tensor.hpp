// Dense boxes of coefficients indexed by integer shift vectors, and
// axis-wise application of sparse univariate functionals.
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "qsg/bspline.hpp"

namespace qsg {

/// A level vector k (nonnegative integers).
using Level = std::vector<int>;

inline int l1_norm(std::span<const int> k) {
  int s = 0;
  for (int v : k) s += v;
  return s;
}

inline int linf_norm(std::span<const int> k) {
  int m = 0;
  for (int v : k) m = std::max(m, v);
  return m;
}

/// Sparse linear functional on the nodes j 2^{-L}, j = 0..2^L, of one level.
struct NodeRow {
  std::vector<int> index;
  std::vector<double> weight;

  std::size_t size() const noexcept { return index.size(); }
};

/// Row-major dense array over a box of integer shifts (last axis fastest).
struct ShiftBox {
  std::vector<int> lo;
  std::vector<int> extent;
  std::vector<double> values;

  ShiftBox() = default;
  ShiftBox(std::vector<int> lo_, std::vector<int> extent_)
      : lo(std::move(lo_)), extent(std::move(extent_)) {
    std::size_t n = 1;
    for (int e : extent) n *= static_cast<std::size_t>(e);
    values.assign(n, 0.0);
  }

  std::size_t dim() const noexcept { return extent.size(); }

  std::size_t offset(std::span<const int> s) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < extent.size(); ++i) {
      const int rel = s[i] - lo[i];
      if (rel < 0 || rel >= extent[i]) throw std::out_of_range("shift outside box");
      off = off * static_cast<std::size_t>(extent[i]) + static_cast<std::size_t>(rel);
    }
    return off;
  }

  double at(std::span<const int> s) const { return values[offset(s)]; }
};

/// Advances a multi-index over [0, extent) in row-major order; returns false after the last one.
inline bool next_index(std::vector<int>& idx, std::span<const int> extent) {
  for (std::size_t i = idx.size(); i-- > 0;) {
    if (++idx[i] < extent[i]) return true;
    idx[i] = 0;
  }
  return false;
}

/// Applies `rows` along `axis` of a row-major tensor; shape[axis] becomes rows.size().
inline std::vector<double> apply_along_axis(const std::vector<double>& in, std::vector<int>& shape, std::size_t axis,
                                            const std::vector<NodeRow>& rows) {
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(shape[i]);
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= static_cast<std::size_t>(shape[i]);
  const std::size_t n_in = static_cast<std::size_t>(shape[axis]);
  const std::size_t n_out = rows.size();
  std::vector<double> out(outer * n_out * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t r = 0; r < n_out; ++r) {
      double* dst = out.data() + (o * n_out + r) * inner;
      const NodeRow& row = rows[r];
      for (std::size_t t = 0; t < row.size(); ++t) {
        const double w = row.weight[t];
        const double* src = in.data() + (o * n_in + static_cast<std::size_t>(row.index[t])) * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += w * src[i];
      }
    }
  }
  shape[axis] = static_cast<int>(n_out);
  return out;
}

/// Sum over a box of coeff(s) * prod_i values_i(s_i), where values_i are the
/// per-dimension active basis values at the evaluation point.
inline double contract_box(const ShiftBox& box, std::span<const ActiveValues> active) {
  const std::size_t d = box.dim();
  // Clip the active windows to the box.
  std::vector<int> first(d), count(d);
  std::vector<int> skip(d);
  for (std::size_t i = 0; i < d; ++i) {
    const int lo = std::max(active[i].first, box.lo[i]);
    const int hi = std::min(active[i].first + active[i].count - 1, box.lo[i] + box.extent[i] - 1);
    if (hi < lo) return 0.0;
    first[i] = lo - box.lo[i];
    skip[i] = lo - active[i].first;
    count[i] = hi - lo + 1;
  }
  if (d == 1) {
    double acc = 0.0;
    for (int a = 0; a < count[0]; ++a) acc += box.values[first[0] + a] * active[0].values[skip[0] + a];
    return acc;
  }
  if (d == 2) {
    double acc = 0.0;
    const std::size_t stride = static_cast<std::size_t>(box.extent[1]);
    for (int a = 0; a < count[0]; ++a) {
      const double* rowp = box.values.data() + (first[0] + a) * stride + first[1];
      double inner = 0.0;
      for (int b = 0; b < count[1]; ++b) inner += rowp[b] * active[1].values[skip[1] + b];
      acc += inner * active[0].values[skip[0] + a];
    }
    return acc;
  }
  std::vector<int> idx(d, 0);
  double acc = 0.0;
  do {
    std::size_t off = 0;
    double w = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      off = off * static_cast<std::size_t>(box.extent[i]) + static_cast<std::size_t>(first[i] + idx[i]);
      w *= active[i].values[skip[i] + idx[i]];
    }
    acc += w * box.values[off];
  } while (next_index(idx, count));
  return acc;
}

}  // namespace qsg
