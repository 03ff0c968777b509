#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "prnulab/raster.hpp"
#include "prnulab/wavelet.hpp"

namespace prnulab {

struct DenoiserParams {
  double sigma0 = 5.0;
  std::size_t levels = 4;
  std::vector<std::size_t> variance_windows = {3, 5, 7, 9};

  void validate() const {
    std::string bad;
    if (!(sigma0 > 0.0)) bad += " sigma0 must be > 0;";
    if (levels < 1) bad += " levels must be >= 1;";
    if (variance_windows.empty()) bad += " variance_windows must be non-empty;";
    for (auto w : variance_windows)
      if (w < 3 || w % 2 == 0) bad += " window " + std::to_string(w) + " must be odd and >= 3;";
    if (!bad.empty()) throw Error(ErrorKind::config, "denoiser params:" + bad);
  }

  friend bool operator==(const DenoiserParams&, const DenoiserParams&) = default;
};

// Signed sensor-noise estimate, same shape as the source plane.
struct NoiseResidual {
  Matrix values;

  std::size_t width() const noexcept { return values.width(); }
  std::size_t height() const noexcept { return values.height(); }
  Dims dims() const noexcept { return values.dims(); }
};

namespace detail {

// Local signal variance estimate: the minimum over all windows of
// max(0, mean(c^2) - sigma0^2). Windows are clipped at the borders and the
// mean is taken over the in-bounds cells only.
inline Matrix local_signal_variance(const Matrix& coeffs, double sigma0,
                                    const std::vector<std::size_t>& windows) {
  const std::size_t w = coeffs.width(), h = coeffs.height();
  // Summed-area table of squares with a zero guard row/column.
  std::vector<double> sat((w + 1) * (h + 1), 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    double row_sum = 0.0;
    for (std::size_t c = 0; c < w; ++c) {
      row_sum += coeffs(r, c) * coeffs(r, c);
      sat[(r + 1) * (w + 1) + c + 1] = sat[r * (w + 1) + c + 1] + row_sum;
    }
  }
  const double noise_var = sigma0 * sigma0;
  Matrix est(w, h, std::numeric_limits<double>::infinity());
  for (std::size_t win : windows) {
    const std::size_t half = win / 2;
    for (std::size_t r = 0; r < h; ++r) {
      const std::size_t r0 = r >= half ? r - half : 0, r1 = std::min(h, r + half + 1);
      for (std::size_t c = 0; c < w; ++c) {
        const std::size_t c0 = c >= half ? c - half : 0, c1 = std::min(w, c + half + 1);
        const double s = sat[r1 * (w + 1) + c1] - sat[r0 * (w + 1) + c1] -
                         sat[r1 * (w + 1) + c0] + sat[r0 * (w + 1) + c0];
        const double local_mean = s / static_cast<double>((r1 - r0) * (c1 - c0));
        est(r, c) = std::min(est(r, c), std::max(0.0, local_mean - noise_var));
      }
    }
  }
  return est;
}

inline Matrix symmetric_pad(const Matrix& m, Dims target) {
  if (m.dims() == target) return m;
  Matrix out(target);
  const auto w = static_cast<std::ptrdiff_t>(m.width()), h = static_cast<std::ptrdiff_t>(m.height());
  for (std::size_t r = 0; r < target.height; ++r)
    for (std::size_t c = 0; c < target.width; ++c)
      out(r, c) = m(static_cast<std::size_t>(wavelet::detail::reflect(static_cast<std::ptrdiff_t>(r), h)),
                    static_cast<std::size_t>(wavelet::detail::reflect(static_cast<std::ptrdiff_t>(c), w)));
  return out;
}

inline Matrix crop(const Matrix& m, Dims target) {
  if (m.dims() == target) return m;
  Matrix out(target);
  for (std::size_t r = 0; r < target.height; ++r)
    std::copy_n(m.row(r).begin(), target.width, out.row(r).begin());
  return out;
}

}  // namespace detail

// Adaptive Wiener shrinkage of one wavelet subband.
inline Matrix wiener_subband(const Matrix& coeffs, double sigma0, const std::vector<std::size_t>& windows) {
  const Matrix var = detail::local_signal_variance(coeffs, sigma0, windows);
  const double noise_var = sigma0 * sigma0;
  Matrix out(coeffs.dims());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = coeffs[i] * (var[i] / (var[i] + noise_var));
  return out;
}

// W = I - denoise(I). The residual is synthesized directly from the part of
// each detail band that the Wiener filter removes, with the approximation
// band zeroed, which is the same quantity without the cancellation error.
inline NoiseResidual extract_residual(const ImagePlane& img, const DenoiserParams& params = {}) {
  params.validate();
  const std::size_t block = std::size_t{1} << params.levels;
  if (img.width() < block || img.height() < block)
    throw Error(ErrorKind::decomposition, "image " + to_string(img.dims()) + " too small for " +
                                              std::to_string(params.levels) + " decomposition levels");
  const Dims padded{(img.width() + block - 1) / block * block, (img.height() + block - 1) / block * block};
  Matrix work = detail::symmetric_pad(img.samples(), padded);
  const double offset = mean(work);
  for (double& v : work.data()) v -= offset;

  auto dec = wavelet::decompose(work, params.levels);
  const double noise_var = params.sigma0 * params.sigma0;
  for (auto& lvl : dec.levels) {
    for (Matrix* band : {&lvl.lh, &lvl.hl, &lvl.hh}) {
      const Matrix var = detail::local_signal_variance(*band, params.sigma0, params.variance_windows);
      for (std::size_t i = 0; i < band->size(); ++i)
        (*band)[i] *= noise_var / (var[i] + noise_var);
    }
  }
  std::fill(dec.approximation.data().begin(), dec.approximation.data().end(), 0.0);
  return {detail::crop(wavelet::reconstruct(dec), img.dims())};
}

// The denoised image, I - W.
inline Matrix denoise(const ImagePlane& img, const DenoiserParams& params = {}) {
  const auto w = extract_residual(img, params);
  Matrix out(img.dims());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.samples()[i] - w.values[i];
  return out;
}

}  // namespace prnulab
