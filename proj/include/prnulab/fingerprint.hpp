#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "prnulab/denoiser.hpp"
#include "prnulab/fft.hpp"
#include "prnulab/source.hpp"
#include "prnulab/util.hpp"

namespace prnulab {

namespace detail {

// Unevaluated sum hi + lo carrying about 106 bits; products enter exactly via fma.
struct Compensated {
  double hi = 0.0;
  double lo = 0.0;

  void add(double v) {
    const double s = hi + v;
    const double bv = s - hi;
    lo += (hi - (s - bv)) + (v - bv);
    hi = s;
  }
  void add_product(double a, double b) {
    const double p = a * b;
    add(p);
    lo += std::fma(a, b, -p);
  }
  void add(const Compensated& o) {
    add(o.hi);
    lo += o.lo;
  }
  double value() const { return hi + lo; }
};

// Quotient of two compensated sums, rounded once at the end.
inline double quotient(const Compensated& n, const Compensated& d) {
  const double dh = d.value();
  const double dl = (d.hi - dh) + d.lo;
  const double q = n.hi / dh;
  double r = std::fma(-q, dh, n.hi);
  r += n.lo;
  r -= q * dl;
  return q + r / dh;
}

}  // namespace detail

// Running sums of the maximum-likelihood estimator K = sum(W I) / sum(I^2).
class FingerprintAccumulator {
 public:
  FingerprintAccumulator() = default;
  explicit FingerprintAccumulator(Dims dims) : dims_(dims), num_(dims.area()), den_(dims.area()) {}

  void accumulate(const ImagePlane& img, const NoiseResidual& w, std::string image_id) {
    if (num_.empty()) *this = FingerprintAccumulator(img.dims());
    if (img.dims() != dims_ || w.dims() != dims_)
      throw Error(ErrorKind::shape, "image '" + image_id + "' is " + to_string(img.dims()) +
                                        " (residual " + to_string(w.dims()) + "), accumulator is " +
                                        to_string(dims_));
    const auto& px = img.samples();
    for (std::size_t i = 0; i < num_.size(); ++i) {
      num_[i].add_product(w.values[i], px[i]);
      den_[i].add_product(px[i], px[i]);
    }
    source_ids_.push_back(std::move(image_id));
  }

  // Elementwise sum of two partial accumulators over disjoint image sets.
  void merge(const FingerprintAccumulator& other) {
    if (other.count() == 0) return;
    if (num_.empty()) {
      *this = other;
      return;
    }
    if (other.dims_ != dims_)
      throw Error(ErrorKind::shape, "accumulator merge: " + to_string(dims_) + " vs " + to_string(other.dims_));
    for (std::size_t i = 0; i < num_.size(); ++i) {
      num_[i].add(other.num_[i]);
      den_[i].add(other.den_[i]);
    }
    source_ids_.insert(source_ids_.end(), other.source_ids_.begin(), other.source_ids_.end());
  }

  Dims dims() const noexcept { return dims_; }
  Matrix numerator() const { return collapse(num_); }
  Matrix denominator() const { return collapse(den_); }
  double ratio_at(std::size_t i) const { return detail::quotient(num_[i], den_[i]); }
  std::size_t count() const noexcept { return source_ids_.size(); }
  const std::vector<std::string>& source_ids() const noexcept { return source_ids_; }

 private:
  Matrix collapse(const std::vector<detail::Compensated>& v) const {
    Matrix m(dims_);
    for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i].value();
    return m;
  }

  Dims dims_;
  std::vector<detail::Compensated> num_;
  std::vector<detail::Compensated> den_;
  std::vector<std::string> source_ids_;
};

inline FingerprintAccumulator accumulate(FingerprintAccumulator acc, const ImagePlane& img,
                                         const NoiseResidual& w, std::string image_id = {}) {
  acc.accumulate(img, w, std::move(image_id));
  return acc;
}

struct NuaRemovalOptions {
  bool zero_mean = true;
  bool whitening = true;
  friend bool operator==(const NuaRemovalOptions&, const NuaRemovalOptions&) = default;
};

// Provenance carried with every fingerprint and persisted in its file.
struct FingerprintProvenance {
  DenoiserParams denoiser;
  NuaRemovalOptions nua{false, false};
  std::vector<std::string> source_ids;

  nlohmann::json to_json() const {
    return {{"denoiser",
             {{"wavelet", "db4"},
              {"sigma0", denoiser.sigma0},
              {"levels", denoiser.levels},
              {"variance_windows", denoiser.variance_windows}}},
            {"nua_removal",
             {{"zero_mean", nua.zero_mean},
              {"whitening", nua.whitening},
              {"order", "zero-mean,whitening"}}},
            {"source_ids", source_ids}};
  }

  static FingerprintProvenance from_json(const nlohmann::json& j) {
    FingerprintProvenance p;
    const auto& d = j.at("denoiser");
    p.denoiser.sigma0 = d.at("sigma0").get<double>();
    p.denoiser.levels = d.at("levels").get<std::size_t>();
    p.denoiser.variance_windows = d.at("variance_windows").get<std::vector<std::size_t>>();
    const auto& n = j.at("nua_removal");
    p.nua.zero_mean = n.at("zero_mean").get<bool>();
    p.nua.whitening = n.at("whitening").get<bool>();
    p.source_ids = j.at("source_ids").get<std::vector<std::string>>();
    return p;
  }

  std::string digest() const { return sha256_hex(to_json().dump()); }
};

struct Fingerprint {
  Matrix k;
  bool cleaned = false;
  FingerprintProvenance provenance;

  Dims dims() const noexcept { return k.dims(); }
  std::string params_digest() const { return provenance.digest(); }
};

inline Fingerprint finalize(const FingerprintAccumulator& acc, const DenoiserParams& denoiser = {}) {
  if (acc.count() == 0) throw Error(ErrorKind::empty_accumulator, "no reference images were accumulated");
  const auto den = acc.denominator();
  const double max_den = *std::max_element(den.data().begin(), den.data().end());
  // Pixels dark in every reference carry no estimate.
  const double eps = 1e-6 * max_den;
  Fingerprint fp;
  fp.k = Matrix(acc.dims());
  for (std::size_t i = 0; i < fp.k.size(); ++i)
    fp.k[i] = (den[i] < eps || den[i] == 0.0) ? 0.0 : acc.ratio_at(i);
  fp.provenance.denoiser = denoiser;
  fp.provenance.source_ids = acc.source_ids();
  return fp;
}

namespace detail {

inline void subtract_row_then_column_means(Matrix& k) {
  const std::size_t w = k.width(), h = k.height();
  for (std::size_t r = 0; r < h; ++r) {
    auto row = k.row(r);
    const double m = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(w);
    for (double& v : row) v -= m;
  }
  std::vector<double> col(w, 0.0);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) col[c] += k(r, c);
  for (double& v : col) v /= static_cast<double>(h);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) k(r, c) -= col[c];
}

// Flattens the magnitude spectrum: each coefficient is divided by the mean
// magnitude of its wrapped 3x3 spectral neighbourhood; DC is zeroed.
inline Matrix whiten_spectrum(const Matrix& k) {
  const std::size_t rows = k.height(), cols = k.width();
  auto spec = fft::forward_full(k);
  std::vector<double> mag(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) mag[i] = std::abs(spec[i]);
  std::vector<fft::Complex> out(spec.size());
  for (std::size_t u = 0; u < rows; ++u)
    for (std::size_t v = 0; v < cols; ++v) {
      double s = 0.0;
      for (std::size_t du = 0; du < 3; ++du)
        for (std::size_t dv = 0; dv < 3; ++dv)
          s += mag[((u + rows + du - 1) % rows) * cols + (v + cols + dv - 1) % cols];
      const double local = s / 9.0;
      const std::size_t i = u * cols + v;
      out[i] = local > 0.0 ? spec[i] / local : fft::Complex{};
    }
  out[0] = {};
  return fft::inverse_full_real(out, rows, cols);
}

}  // namespace detail

// Suppresses artifacts shared across devices: row/column zero-meaning
// followed by spectral whitening. Each pass can be switched off.
inline Fingerprint remove_nua(const Fingerprint& fp, NuaRemovalOptions options = {}) {
  if (!all_finite(fp.k)) throw Error(ErrorKind::format, "fingerprint contains non-finite values");
  Fingerprint out = fp;
  if (options.zero_mean) detail::subtract_row_then_column_means(out.k);
  if (options.whitening) out.k = detail::whiten_spectrum(out.k);
  // Whitening leaves the zeroed mean spectrum lines at rounding level; a
  // second linear pass pins them back to zero.
  if (options.zero_mean && options.whitening) detail::subtract_row_then_column_means(out.k);
  out.cleaned = options.zero_mean || options.whitening;
  out.provenance.nua = options;
  return out;
}

// Builds a fingerprint from reference images with a fixed reduction tree:
// ids are sorted, split into fixed-size leaves accumulated in order, and
// leaves are merged pairwise. Output bits do not depend on `workers`.
inline Fingerprint build_fingerprint(std::vector<std::string> image_ids, const ImageSource& source,
                                     const DenoiserParams& denoiser = {}, NuaRemovalOptions nua = {},
                                     std::size_t workers = 1) {
  constexpr std::size_t kLeaf = 8;
  std::sort(image_ids.begin(), image_ids.end());
  image_ids.erase(std::unique(image_ids.begin(), image_ids.end()), image_ids.end());
  if (image_ids.empty()) throw Error(ErrorKind::empty_accumulator, "no reference images given");
  const std::size_t leaves = (image_ids.size() + kLeaf - 1) / kLeaf;
  std::vector<FingerprintAccumulator> partial(leaves);
  parallel_for(leaves, workers, [&](std::size_t leaf) {
    const std::size_t end = std::min(image_ids.size(), (leaf + 1) * kLeaf);
    for (std::size_t i = leaf * kLeaf; i < end; ++i) {
      auto img = source.load(image_ids[i]);
      auto w = extract_residual(img.plane, denoiser);
      partial[leaf].accumulate(img.plane, w, image_ids[i]);
    }
  });
  // Shape errors surface per image above; leaves must agree with each other.
  for (std::size_t stride = 1; stride < leaves; stride *= 2)
    for (std::size_t i = 0; i + stride < leaves; i += 2 * stride) {
      if (partial[i].count() && partial[i + stride].count() && partial[i].dims() != partial[i + stride].dims())
        throw Error(ErrorKind::shape, "reference '" + partial[i + stride].source_ids().front() + "' is " +
                                          to_string(partial[i + stride].dims()) + ", expected " +
                                          to_string(partial[i].dims()));
      partial[i].merge(partial[i + stride]);
    }
  auto fp = finalize(partial[0], denoiser);
  if (nua.zero_mean || nua.whitening) fp = remove_nua(fp, nua);
  return fp;
}

// ---- persistence -----------------------------------------------------------
// "PRNUFP01" | u32 width | u32 height | u8 cleaned | u32 source count |
// f64[width*height] row-major | u32 json length | provenance JSON (UTF-8).
// All integers and floats little-endian.

inline constexpr char kFingerprintMagic[8] = {'P', 'R', 'N', 'U', 'F', 'P', '0', '1'};

namespace detail {
inline void put_u32(std::vector<std::uint8_t>& o, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) o.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u64(std::vector<std::uint8_t>& o, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) o.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline std::uint64_t get_le(const std::vector<std::uint8_t>& b, std::size_t& pos, int n) {
  if (pos + static_cast<std::size_t>(n) > b.size()) throw Error(ErrorKind::format, "fingerprint file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[pos + static_cast<std::size_t>(i)]) << (8 * i);
  pos += static_cast<std::size_t>(n);
  return v;
}
}  // namespace detail

inline std::vector<std::uint8_t> serialize_fingerprint(const Fingerprint& fp) {
  std::vector<std::uint8_t> out(std::begin(kFingerprintMagic), std::end(kFingerprintMagic));
  detail::put_u32(out, static_cast<std::uint32_t>(fp.k.width()));
  detail::put_u32(out, static_cast<std::uint32_t>(fp.k.height()));
  out.push_back(fp.cleaned ? 1 : 0);
  detail::put_u32(out, static_cast<std::uint32_t>(fp.provenance.source_ids.size()));
  for (double v : fp.k.data()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  const std::string json = fp.provenance.to_json().dump();
  detail::put_u32(out, static_cast<std::uint32_t>(json.size()));
  out.insert(out.end(), json.begin(), json.end());
  return out;
}

inline Fingerprint deserialize_fingerprint(const std::vector<std::uint8_t>& b) {
  if (b.size() < 8 || !std::equal(std::begin(kFingerprintMagic), std::end(kFingerprintMagic), b.begin()))
    throw Error(ErrorKind::format, "missing PRNUFP01 magic");
  std::size_t pos = 8;
  const auto w = static_cast<std::size_t>(detail::get_le(b, pos, 4));
  const auto h = static_cast<std::size_t>(detail::get_le(b, pos, 4));
  if (pos >= b.size()) throw Error(ErrorKind::format, "fingerprint file truncated");
  const bool cleaned = b[pos++] != 0;
  const auto count = static_cast<std::size_t>(detail::get_le(b, pos, 4));
  if (w * h > (b.size() - pos) / 8) throw Error(ErrorKind::format, "fingerprint file truncated");
  Fingerprint fp;
  fp.k = Matrix(w, h);
  for (double& v : fp.k.data()) v = std::bit_cast<double>(detail::get_le(b, pos, 8));
  const auto len = static_cast<std::size_t>(detail::get_le(b, pos, 4));
  if (pos + len > b.size()) throw Error(ErrorKind::format, "provenance block truncated");
  try {
    fp.provenance = FingerprintProvenance::from_json(
        nlohmann::json::parse(b.begin() + static_cast<std::ptrdiff_t>(pos),
                              b.begin() + static_cast<std::ptrdiff_t>(pos + len)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, std::string("provenance block: ") + e.what());
  }
  if (fp.provenance.source_ids.size() != count)
    throw Error(ErrorKind::format, "source count does not match provenance");
  fp.cleaned = cleaned;
  return fp;
}

inline void write_fingerprint(const std::filesystem::path& path, const Fingerprint& fp) {
  write_file_bytes(path, serialize_fingerprint(fp));
}

inline Fingerprint read_fingerprint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open fingerprint '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_fingerprint(bytes);
}

}  // namespace prnulab
