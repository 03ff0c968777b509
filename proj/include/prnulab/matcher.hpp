#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "prnulab/denoiser.hpp"
#include "prnulab/fft.hpp"
#include "prnulab/fingerprint.hpp"
#include "prnulab/util.hpp"

namespace prnulab {

struct Shift {
  std::size_t s1 = 0;  // row shift
  std::size_t s2 = 0;  // column shift
  friend bool operator==(const Shift&, const Shift&) = default;
};

struct MatcherParams {
  std::size_t neighborhood_radius = 5;
  double tau = 60.0;
  // Peak at the largest |rho| instead of the largest rho.
  bool two_sided_peak = false;

  void validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau))
      throw Error(ErrorKind::config, "matcher tau must be finite and > 0, got " + format_real(tau));
  }
};

// rho(s1, s2) for every circular shift; rho is height x width.
struct CorrelationSurface {
  Matrix rho;
  Shift peak_shift;

  std::size_t width() const noexcept { return rho.width(); }
  std::size_t height() const noexcept { return rho.height(); }
  double peak() const noexcept { return rho(peak_shift.s1, peak_shift.s2); }
};

// First maximum in row-major order, so ties go to the smallest (s1, s2).
inline Shift find_peak(const Matrix& rho, bool two_sided = false) {
  std::size_t best = 0;
  double best_v = two_sided ? std::abs(rho[0]) : rho[0];
  for (std::size_t i = 1; i < rho.size(); ++i) {
    const double v = two_sided ? std::abs(rho[i]) : rho[i];
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return {best / rho.width(), best % rho.width()};
}

namespace detail {

// Mean-removed operand in the frequency domain with its Euclidean norm.
struct CenteredSpectrum {
  fft::HalfSpectrum spectrum;
  double norm = 0.0;
};

inline CenteredSpectrum center_and_transform(const Matrix& m, const char* which) {
  if (!all_finite(m)) throw Error(ErrorKind::degenerate_input, std::string(which) + " has non-finite values");
  Matrix c = m;
  const double mu = mean(c);
  double ss = 0.0;
  for (double& v : c.data()) {
    v -= mu;
    ss += v * v;
  }
  if (!(ss > 0.0)) throw Error(ErrorKind::degenerate_input, std::string(which) + " is constant");
  return {fft::forward_real(c), std::sqrt(ss)};
}

// rho(s) = sum_i x(i) y(i + s) / (|x| |y|) = IFFT(conj(X) Y)(s) / (mn |x| |y|).
inline Matrix correlate_spectra(const CenteredSpectrum& x, const CenteredSpectrum& y) {
  fft::HalfSpectrum prod{x.spectrum.rows, x.spectrum.cols, {}};
  prod.coeffs.resize(x.spectrum.coeffs.size());
  for (std::size_t i = 0; i < prod.coeffs.size(); ++i)
    prod.coeffs[i] = std::conj(x.spectrum.coeffs[i]) * y.spectrum.coeffs[i];
  Matrix rho = fft::inverse_real(prod);
  const double scale = 1.0 / (static_cast<double>(rho.size()) * x.norm * y.norm);
  for (double& v : rho.data()) v *= scale;
  return rho;
}

}  // namespace detail

// Normalized cross-correlation over all circular shifts. Operands of
// different size are zero-padded down-right to the common bounding size.
inline CorrelationSurface ncc_surface(const Matrix& x, const Matrix& y, bool two_sided_peak = false) {
  Matrix xp = x, yp = y;
  if (x.dims() != y.dims()) {
    const Dims common{std::max(x.width(), y.width()), std::max(x.height(), y.height())};
    xp = pad_down_right(x, common);
    yp = pad_down_right(y, common);
  }
  const auto fx = detail::center_and_transform(xp, "first correlation operand");
  const auto fy = detail::center_and_transform(yp, "second correlation operand");
  CorrelationSurface s{detail::correlate_spectra(fx, fy), {}};
  s.peak_shift = find_peak(s.rho, two_sided_peak);
  return s;
}

// Number of distinct cells in the wrapped (2r+1)^2 square around the peak.
inline std::size_t exclusion_size(Dims d, std::size_t radius) {
  const std::size_t side = 2 * radius + 1;
  return std::min(side, d.height) * std::min(side, d.width);
}

inline double pce(const CorrelationSurface& s, const MatcherParams& params = {}) {
  const std::size_t h = s.height(), w = s.width(), r = params.neighborhood_radius;
  const std::size_t excluded = exclusion_size(s.rho.dims(), r);
  if (excluded >= h * w)
    throw Error(ErrorKind::degenerate_surface, "peak neighbourhood covers the whole " + to_string(s.rho.dims()) +
                                                   " surface");
  auto wrapped_distance = [](std::size_t a, std::size_t b, std::size_t n) {
    const std::size_t d = a >= b ? a - b : b - a;
    return std::min(d, n - d);
  };
  double energy = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    const bool row_in = wrapped_distance(i, s.peak_shift.s1, h) <= r;
    for (std::size_t j = 0; j < w; ++j) {
      if (row_in && wrapped_distance(j, s.peak_shift.s2, w) <= r) continue;
      energy += s.rho(i, j) * s.rho(i, j);
    }
  }
  if (!(energy > 0.0))
    throw Error(ErrorKind::degenerate_surface, "all correlations outside the peak neighbourhood are zero");
  const double p = s.peak();
  return p * p / (energy / static_cast<double>(h * w - excluded));
}

inline bool decide(double pce_value, double tau) { return pce_value > tau; }

struct PceReport {
  std::string image_id;
  std::string fingerprint_id;
  double pce = 0.0;
  Shift peak_shift;
  int rotation = 0;  // degrees counter-clockwise of the submitted image
  bool scaled = false;
  double scale_x = 1.0;
  double scale_y = 1.0;
  double tau = 60.0;
  bool decision = false;

  static constexpr std::array<const char*, 11> kCsvColumns = {
      "image_id", "fingerprint_id", "pce", "s1", "s2", "rotation", "scaled", "scale_x", "scale_y", "tau", "decision"};

  std::vector<std::string> csv_fields() const {
    return {image_id,
            fingerprint_id,
            format_real(pce),
            std::to_string(peak_shift.s1),
            std::to_string(peak_shift.s2),
            std::to_string(rotation),
            scaled ? "true" : "false",
            format_real(scale_x),
            format_real(scale_y),
            format_real(tau),
            decision ? "true" : "false"};
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"image_id", image_id},
                        {"fingerprint_id", fingerprint_id},
                        {"pce", pce},
                        {"peak_shift", {peak_shift.s1, peak_shift.s2}},
                        {"rotation", rotation},
                        {"scaled", scaled},
                        {"tau", tau},
                        {"decision", decision}};
    j["scale_factor"] = scaled ? nlohmann::json{{"x", scale_x}, {"y", scale_y}} : nlohmann::json(nullptr);
    return j;
  }
};

// A test pair prepared against one fingerprint geometry: for each of the
// four candidate orientations, the re-oriented (and possibly rescaled)
// image plus the transformed residual. Sharing one preparation across
// fingerprints of equal size avoids repeating the residual transforms.
struct PreparedTest {
  struct Orientation {
    int rotation = 0;
    Matrix image;
    detail::CenteredSpectrum residual;
    bool scaled = false;
    double scale_x = 1.0;
    double scale_y = 1.0;
  };
  Dims target;
  std::vector<Orientation> orientations;
};

inline PreparedTest prepare_test(const ImagePlane& img, const NoiseResidual& w, Dims target) {
  if (img.dims() != w.dims())
    throw Error(ErrorKind::shape, "residual " + to_string(w.dims()) + " does not match image " + to_string(img.dims()));
  PreparedTest out{target, {}};
  for (int q = 0; q < 4; ++q) {
    PreparedTest::Orientation o;
    o.rotation = 90 * q;
    // Undo a counter-clockwise rotation of q quarter turns.
    Matrix im = rotate_ccw(img.samples(), 4 - q);
    Matrix res = rotate_ccw(w.values, 4 - q);
    if (im.dims() != target) {
      o.scaled = true;
      o.scale_x = static_cast<double>(target.width) / static_cast<double>(im.width());
      o.scale_y = static_cast<double>(target.height) / static_cast<double>(im.height());
      im = resize_bicubic(im, target);
      res = resize_bicubic(res, target);
    }
    o.image = std::move(im);
    o.residual = detail::center_and_transform(res, "noise residual");
    out.orientations.push_back(std::move(o));
  }
  return out;
}

inline PceReport match_prepared(const Fingerprint& fp, const PreparedTest& test, const MatcherParams& params = {}) {
  params.validate();
  if (fp.dims() != test.target)
    throw Error(ErrorKind::shape, "test prepared for " + to_string(test.target) + ", fingerprint is " +
                                      to_string(fp.dims()));
  std::optional<PceReport> best;
  for (const auto& o : test.orientations) {
    const auto x = detail::center_and_transform(hadamard(o.image, fp.k), "image-fingerprint product");
    CorrelationSurface s{detail::correlate_spectra(x, o.residual), {}};
    s.peak_shift = find_peak(s.rho, params.two_sided_peak);
    const double value = pce(s, params);
    if (!best || value > best->pce) {
      best = PceReport{};
      best->pce = value;
      best->peak_shift = s.peak_shift;
      best->rotation = o.rotation;
      best->scaled = o.scaled;
      best->scale_x = o.scale_x;
      best->scale_y = o.scale_y;
    }
  }
  best->tau = params.tau;
  best->decision = decide(best->pce, params.tau);
  return *best;
}

// Correlates X = I * K against Y = W over the four right-angle orientations
// of the test pair and keeps the orientation with the highest PCE.
inline PceReport match_image(const Fingerprint& fp, const ImagePlane& img, const NoiseResidual& w,
                             const MatcherParams& params = {}) {
  params.validate();
  return match_prepared(fp, prepare_test(img, w, fp.dims()), params);
}

}  // namespace prnulab
