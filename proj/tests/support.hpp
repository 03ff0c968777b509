#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "prnulab/matrix.hpp"
#include "prnulab/raster.hpp"
#include "prnulab/util.hpp"

namespace prnulab::testing {

inline Matrix random_matrix(Dims d, std::uint64_t seed, double scale = 1.0, double offset = 0.0) {
  Rng rng(seed);
  Matrix m(d);
  for (double& v : m.data()) v = offset + scale * rng.normal();
  return m;
}

inline ImagePlane random_plane(Dims d, std::uint64_t seed, double lo = 20.0, double hi = 235.0) {
  Rng rng(seed);
  Matrix m(d);
  for (double& v : m.data()) v = lo + (hi - lo) * rng.uniform();
  return ImagePlane(std::move(m));
}

// Direct evaluation of the normalized cross-correlation at one shift:
// sum_ij (x[i,j] - mx)(y[(i+s1) mod m, (j+s2) mod n] - my) / (|x - mx| |y - my|).
inline double direct_ncc(const Matrix& x, const Matrix& y, std::size_t s1, std::size_t s2) {
  const std::size_t h = x.height(), w = x.width();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double num = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      const double a = x(i, j) - mx;
      const double b = y((i + s1) % h, (j + s2) % w) - my;
      num += a * b;
      nx += a * a;
      ny += (y(i, j) - my) * (y(i, j) - my);
    }
  return num / (std::sqrt(nx) * std::sqrt(ny));
}

inline double max_abs_row_mean(const Matrix& m) {
  double worst = 0.0;
  for (std::size_t r = 0; r < m.height(); ++r) {
    double s = 0.0;
    for (double v : m.row(r)) s += v;
    worst = std::max(worst, std::abs(s / static_cast<double>(m.width())));
  }
  return worst;
}

inline double max_abs_col_mean(const Matrix& m) {
  double worst = 0.0;
  for (std::size_t c = 0; c < m.width(); ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < m.height(); ++r) s += m(r, c);
    worst = std::max(worst, std::abs(s / static_cast<double>(m.height())));
  }
  return worst;
}

}  // namespace prnulab::testing
