#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "prnulab/error.hpp"
#include "prnulab/matrix.hpp"

namespace prnulab {

// Single-channel intensity raster in [0, 255]. Construction validates the
// pipeline invariants: finite samples, value range, and a 64x64 minimum.
class ImagePlane {
 public:
  static constexpr std::size_t kMinSide = 64;
  static constexpr double kMaxValue = 255.0;

  explicit ImagePlane(Matrix samples) : samples_(std::move(samples)) {
    if (samples_.width() < kMinSide || samples_.height() < kMinSide)
      throw Error(ErrorKind::size, "raster " + to_string(samples_.dims()) +
                                       " is below the 64x64 minimum");
    for (double v : samples_.data())
      if (!std::isfinite(v) || v < 0.0 || v > kMaxValue)
        throw Error(ErrorKind::format, "sample outside [0, 255] or non-finite");
  }

  // Clamps into range before validating; used after resampling and synthesis.
  static ImagePlane clamped(Matrix samples) {
    for (double& v : samples.data()) v = std::clamp(v, 0.0, kMaxValue);
    return ImagePlane(std::move(samples));
  }

  std::size_t width() const noexcept { return samples_.width(); }
  std::size_t height() const noexcept { return samples_.height(); }
  Dims dims() const noexcept { return samples_.dims(); }
  const Matrix& samples() const noexcept { return samples_; }

  friend bool operator==(const ImagePlane&, const ImagePlane&) = default;

 private:
  Matrix samples_;
};

struct GpsCoordinate {
  double latitude = 0.0;
  double longitude = 0.0;
  friend bool operator==(const GpsCoordinate&, const GpsCoordinate&) = default;
};

// The subset of Exif metadata the curation rules and anomaly scan rely on.
// Missing tags stay std::nullopt.
struct ExifRecord {
  std::optional<std::string> make;
  std::optional<std::string> model;
  std::optional<std::string> software;
  std::optional<double> focal_length;  // millimetres, rounded to 0.01
  std::optional<double> digital_zoom;
  Dims pixel_dims;
  std::optional<std::string> custom_rendered;
  std::optional<std::string> body_serial;
  std::optional<GpsCoordinate> gps;

  friend bool operator==(const ExifRecord&, const ExifRecord&) = default;
};

inline double round_focal_length(double mm) { return std::round(mm * 100.0) / 100.0; }

// BT.601 luma.
inline ImagePlane to_luminance(const ImagePlane& r, const ImagePlane& g, const ImagePlane& b) {
  if (r.dims() != g.dims() || r.dims() != b.dims())
    throw Error(ErrorKind::shape, "channel dimensions differ: " + to_string(r.dims()) + ", " +
                                      to_string(g.dims()) + ", " + to_string(b.dims()));
  Matrix out(r.dims());
  const auto& rs = r.samples();
  const auto& gs = g.samples();
  const auto& bs = b.samples();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::clamp(0.299 * rs[i] + 0.587 * gs[i] + 0.114 * bs[i], 0.0, ImagePlane::kMaxValue);
  return ImagePlane(std::move(out));
}

}  // namespace prnulab
