#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prnulab/error.hpp"

namespace prnulab {

struct Dims {
  std::size_t width = 0;
  std::size_t height = 0;

  std::size_t area() const noexcept { return width * height; }
  Dims transposed() const noexcept { return {height, width}; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(const Dims& d) {
  return std::to_string(d.width) + "x" + std::to_string(d.height);
}

// Dense row-major real matrix. Element (row, col) lives at row * width + col.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t width, std::size_t height, double fill = 0.0)
      : width_(width), height_(height), data_(width * height, fill) {}
  explicit Matrix(Dims dims, double fill = 0.0) : Matrix(dims.width, dims.height, fill) {}
  Matrix(std::size_t width, std::size_t height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != width_ * height_)
      throw Error(ErrorKind::shape, "sample count " + std::to_string(data_.size()) +
                                        " does not match " + std::to_string(width_) + "x" +
                                        std::to_string(height_));
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  Dims dims() const noexcept { return {width_, height_}; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t row, std::size_t col) noexcept { return data_[row * width_ + col]; }
  double operator()(std::size_t row, std::size_t col) const noexcept {
    return data_[row * width_ + col];
  }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * width_, width_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * width_, width_};
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> data_;
};

inline void require_same_dims(const Matrix& a, const Matrix& b, const char* what) {
  if (a.dims() != b.dims())
    throw Error(ErrorKind::shape, std::string(what) + ": " + to_string(a.dims()) + " vs " +
                                      to_string(b.dims()));
}

inline double mean(const Matrix& m) {
  if (m.empty()) return 0.0;
  double s = 0.0;
  for (double v : m.data()) s += v;
  return s / static_cast<double>(m.size());
}

inline bool all_finite(const Matrix& m) {
  return std::all_of(m.data().begin(), m.data().end(), [](double v) { return std::isfinite(v); });
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_dims(a, b, "elementwise product");
  Matrix out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

// Pearson sample correlation of two equally-shaped matrices.
inline double correlation(const Matrix& a, const Matrix& b) {
  require_same_dims(a, b, "correlation");
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

// Counter-clockwise rotation by quarter_turns * 90 degrees.
inline Matrix rotate_ccw(const Matrix& m, int quarter_turns) {
  const int q = ((quarter_turns % 4) + 4) % 4;
  const std::size_t w = m.width(), h = m.height();
  switch (q) {
    case 0:
      return m;
    case 1: {
      Matrix out(h, w);
      for (std::size_t r = 0; r < w; ++r)
        for (std::size_t c = 0; c < h; ++c) out(r, c) = m(c, w - 1 - r);
      return out;
    }
    case 2: {
      Matrix out(w, h);
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) out(r, c) = m(h - 1 - r, w - 1 - c);
      return out;
    }
    default: {
      Matrix out(h, w);
      for (std::size_t r = 0; r < w; ++r)
        for (std::size_t c = 0; c < h; ++c) out(r, c) = m(h - 1 - c, r);
      return out;
    }
  }
}

// Zero padding towards the bottom and the right.
inline Matrix pad_down_right(const Matrix& m, Dims target) {
  if (target.width < m.width() || target.height < m.height())
    throw Error(ErrorKind::shape, "padding target " + to_string(target) + " smaller than " +
                                      to_string(m.dims()));
  if (m.dims() == target) return m;
  Matrix out(target);
  for (std::size_t r = 0; r < m.height(); ++r)
    std::copy(m.row(r).begin(), m.row(r).end(), out.row(r).begin());
  return out;
}

// Circular shift: out(r, c) = m(r - dr, c - dc), indices modulo dims.
inline Matrix circshift(const Matrix& m, std::ptrdiff_t dr, std::ptrdiff_t dc) {
  const auto h = static_cast<std::ptrdiff_t>(m.height());
  const auto w = static_cast<std::ptrdiff_t>(m.width());
  Matrix out(m.dims());
  for (std::ptrdiff_t r = 0; r < h; ++r)
    for (std::ptrdiff_t c = 0; c < w; ++c)
      out(static_cast<std::size_t>(((r + dr) % h + h) % h),
          static_cast<std::size_t>(((c + dc) % w + w) % w)) =
          m(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  return out;
}

namespace detail {

// Keys cubic convolution kernel with a = -0.5.
inline std::array<double, 4> cubic_weights(double t) {
  constexpr double a = -0.5;
  auto k = [](double x) {
    x = std::abs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
  };
  return {k(1.0 + t), k(t), k(1.0 - t), k(2.0 - t)};
}

struct CubicTap {
  std::array<std::size_t, 4> index;
  std::array<double, 4> weight;
};

inline std::vector<CubicTap> cubic_taps(std::size_t src_n, std::size_t dst_n) {
  std::vector<CubicTap> taps(dst_n);
  const double ratio = static_cast<double>(src_n) / static_cast<double>(dst_n);
  const auto last = static_cast<std::ptrdiff_t>(src_n) - 1;
  for (std::size_t i = 0; i < dst_n; ++i) {
    const double x = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    const double base = std::floor(x);
    taps[i].weight = cubic_weights(x - base);
    for (int k = 0; k < 4; ++k) {
      const auto j = static_cast<std::ptrdiff_t>(base) - 1 + k;
      taps[i].index[static_cast<std::size_t>(k)] =
          static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(j, 0, last));
    }
  }
  return taps;
}

}  // namespace detail

// Separable bicubic resampling with pixel-centre alignment and replicated borders.
inline Matrix resize_bicubic(const Matrix& m, Dims target) {
  if (target.width == 0 || target.height == 0 || m.empty())
    throw Error(ErrorKind::shape, "cannot resize to or from an empty raster");
  if (m.dims() == target) return m;
  const auto tx = detail::cubic_taps(m.width(), target.width);
  const auto ty = detail::cubic_taps(m.height(), target.height);
  Matrix horiz(target.width, m.height());
  for (std::size_t r = 0; r < m.height(); ++r)
    for (std::size_t c = 0; c < target.width; ++c) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += tx[c].weight[k] * m(r, tx[c].index[k]);
      horiz(r, c) = s;
    }
  Matrix out(target);
  for (std::size_t r = 0; r < target.height; ++r)
    for (std::size_t c = 0; c < target.width; ++c) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += ty[r].weight[k] * horiz(ty[r].index[k], c);
      out(r, c) = s;
    }
  return out;
}

}  // namespace prnulab
