#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "prnulab/matrix.hpp"

// Orthogonal 8-tap Daubechies (db4) wavelet with half-sample symmetric
// boundary extension. Coefficient bands are (N + 7) / 2 long per level, so
// the transform is expansive but reconstructs its input exactly.
namespace prnulab::wavelet {

inline constexpr std::size_t kTaps = 8;

inline constexpr std::array<double, kTaps> kDecLow = {
    -0.010597401785069032, 0.0328830116668852,   0.030841381835560764, -0.18703481171909309,
    -0.027983769416859854, 0.6308807679298589,   0.7148465705529157,   0.2303778133088965};

// Quadrature mirror of the low-pass: g[k] = (-1)^(k+1) h[L-1-k].
inline constexpr std::array<double, kTaps> kDecHigh = [] {
  std::array<double, kTaps> g{};
  for (std::size_t k = 0; k < kTaps; ++k)
    g[k] = ((k % 2) == 0 ? -1.0 : 1.0) * kDecLow[kTaps - 1 - k];
  return g;
}();

inline constexpr std::size_t coeff_length(std::size_t n) { return (n + kTaps - 1) / 2; }

namespace detail {

inline std::ptrdiff_t reflect(std::ptrdiff_t k, std::ptrdiff_t n) {
  // Half-sample symmetric: x[-1] = x[0], x[n] = x[n-1]; repeated for long overhangs.
  const std::ptrdiff_t period = 2 * n;
  k %= period;
  if (k < 0) k += period;
  return k < n ? k : period - 1 - k;
}

}  // namespace detail

// One analysis step on a strided 1-D signal.
inline void analyze(std::span<const double> x, std::span<double> low, std::span<double> high) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const std::size_t out = coeff_length(x.size());
  for (std::size_t i = 0; i < out; ++i) {
    const auto o = static_cast<std::ptrdiff_t>(2 * i + 1);
    double lo = 0.0, hi = 0.0;
    for (std::size_t j = 0; j < kTaps; ++j) {
      const auto k = o - static_cast<std::ptrdiff_t>(j);
      const double v = (k >= 0 && k < n) ? x[static_cast<std::size_t>(k)]
                                         : x[static_cast<std::size_t>(detail::reflect(k, n))];
      lo += kDecLow[j] * v;
      hi += kDecHigh[j] * v;
    }
    low[i] = lo;
    high[i] = hi;
  }
}

// Inverse of analyze(): rebuilds the first `n` samples from the two bands.
inline void synthesize(std::span<const double> low, std::span<const double> high, std::span<double> x) {
  const std::size_t n = x.size();
  const auto bands = static_cast<std::ptrdiff_t>(low.size());
  for (std::size_t m = 0; m < n; ++m) {
    // x[m] = sum_i low[i] h[2i+1-m] + high[i] g[2i+1-m], with 0 <= 2i+1-m < L.
    double s = 0.0;
    const auto mm = static_cast<std::ptrdiff_t>(m);
    std::ptrdiff_t i_lo = (mm - 1 + 1) / 2;  // smallest i with 2i+1-m >= 0
    if (2 * i_lo + 1 - mm < 0) ++i_lo;
    for (std::ptrdiff_t i = i_lo; i < bands; ++i) {
      const std::ptrdiff_t k = 2 * i + 1 - mm;
      if (k >= static_cast<std::ptrdiff_t>(kTaps)) break;
      s += low[static_cast<std::size_t>(i)] * kDecLow[static_cast<std::size_t>(k)] +
           high[static_cast<std::size_t>(i)] * kDecHigh[static_cast<std::size_t>(k)];
    }
    x[m] = s;
  }
}

// Detail bands of one 2-D level. Naming follows the filter applied along
// (rows, columns): lh = low vertical / high horizontal.
struct Level {
  Matrix lh;
  Matrix hl;
  Matrix hh;
};

struct Decomposition {
  Matrix approximation;
  std::vector<Level> levels;  // levels[0] is the finest
  std::vector<Dims> sizes;    // input size of each level
};

inline void analyze_2d(const Matrix& in, Matrix& ll, Level& lvl) {
  const std::size_t w = in.width(), h = in.height();
  const std::size_t cw = coeff_length(w), ch = coeff_length(h);
  Matrix lo_rows(cw, h), hi_rows(cw, h);
  for (std::size_t r = 0; r < h; ++r) analyze(in.row(r), lo_rows.row(r), hi_rows.row(r));

  ll = Matrix(cw, ch);
  lvl.lh = Matrix(cw, ch);
  lvl.hl = Matrix(cw, ch);
  lvl.hh = Matrix(cw, ch);
  std::vector<double> col(h), lo(ch), hi(ch);
  for (std::size_t c = 0; c < cw; ++c) {
    for (std::size_t r = 0; r < h; ++r) col[r] = lo_rows(r, c);
    analyze(col, lo, hi);
    for (std::size_t r = 0; r < ch; ++r) {
      ll(r, c) = lo[r];
      lvl.hl(r, c) = hi[r];
    }
    for (std::size_t r = 0; r < h; ++r) col[r] = hi_rows(r, c);
    analyze(col, lo, hi);
    for (std::size_t r = 0; r < ch; ++r) {
      lvl.lh(r, c) = lo[r];
      lvl.hh(r, c) = hi[r];
    }
  }
}

inline Matrix synthesize_2d(const Matrix& ll, const Level& lvl, Dims out_dims) {
  const std::size_t cw = ll.width(), ch = ll.height();
  const std::size_t w = out_dims.width, h = out_dims.height;
  Matrix lo_rows(cw, h), hi_rows(cw, h);
  std::vector<double> lo(ch), hi(ch), col(h);
  for (std::size_t c = 0; c < cw; ++c) {
    for (std::size_t r = 0; r < ch; ++r) {
      lo[r] = ll(r, c);
      hi[r] = lvl.hl(r, c);
    }
    synthesize(lo, hi, col);
    for (std::size_t r = 0; r < h; ++r) lo_rows(r, c) = col[r];
    for (std::size_t r = 0; r < ch; ++r) {
      lo[r] = lvl.lh(r, c);
      hi[r] = lvl.hh(r, c);
    }
    synthesize(lo, hi, col);
    for (std::size_t r = 0; r < h; ++r) hi_rows(r, c) = col[r];
  }
  Matrix out(w, h);
  for (std::size_t r = 0; r < h; ++r) synthesize(lo_rows.row(r), hi_rows.row(r), out.row(r));
  return out;
}

inline Decomposition decompose(const Matrix& in, std::size_t levels) {
  Decomposition d;
  Matrix current = in;
  for (std::size_t l = 0; l < levels; ++l) {
    d.sizes.push_back(current.dims());
    Matrix ll;
    Level lvl;
    analyze_2d(current, ll, lvl);
    d.levels.push_back(std::move(lvl));
    current = std::move(ll);
  }
  d.approximation = std::move(current);
  return d;
}

inline Matrix reconstruct(const Decomposition& d) {
  Matrix current = d.approximation;
  for (std::size_t l = d.levels.size(); l-- > 0;)
    current = synthesize_2d(current, d.levels[l], d.sizes[l]);
  return current;
}

}  // namespace prnulab::wavelet
