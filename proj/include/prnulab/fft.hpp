#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <vector>

#include <fftw3.h>

#include "prnulab/matrix.hpp"

// Thin RAII layer over FFTW's 2-D transforms. Plans are created once per
// shape under a global lock (FFTW planning is not thread-safe) and executed
// through the new-array interface so concurrent callers share them.
namespace prnulab::fft {

namespace detail {

template <typename T>
struct FftwDeleter {
  void operator()(T* p) const noexcept { fftw_free(p); }
};

template <typename T>
using FftwPtr = std::unique_ptr<T[], FftwDeleter<T>>;

template <typename T>
FftwPtr<T> fftw_alloc(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * (n == 0 ? 1 : n)));
  if (p == nullptr) throw std::bad_alloc();
  return FftwPtr<T>(p);
}

enum class Kind { r2c, c2r, c2c_forward, c2c_backward };

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(Kind kind, std::size_t rows, std::size_t cols) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(kind, rows, cols);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const int n0 = static_cast<int>(rows), n1 = static_cast<int>(cols);
    const std::size_t half = rows * (cols / 2 + 1);
    fftw_plan plan = nullptr;
    switch (kind) {
      case Kind::r2c: {
        auto in = fftw_alloc<double>(rows * cols);
        auto out = fftw_alloc<fftw_complex>(half);
        plan = fftw_plan_dft_r2c_2d(n0, n1, in.get(), out.get(), FFTW_ESTIMATE);
        break;
      }
      case Kind::c2r: {
        auto in = fftw_alloc<fftw_complex>(half);
        auto out = fftw_alloc<double>(rows * cols);
        plan = fftw_plan_dft_c2r_2d(n0, n1, in.get(), out.get(), FFTW_ESTIMATE);
        break;
      }
      case Kind::c2c_forward:
      case Kind::c2c_backward: {
        auto in = fftw_alloc<fftw_complex>(rows * cols);
        auto out = fftw_alloc<fftw_complex>(rows * cols);
        plan = fftw_plan_dft_2d(n0, n1, in.get(), out.get(),
                                kind == Kind::c2c_forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                FFTW_ESTIMATE);
        break;
      }
    }
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::tuple<Kind, std::size_t, std::size_t>, fftw_plan> plans_;
};

}  // namespace detail

using Complex = std::complex<double>;

// Half spectrum of a real matrix: rows x (cols/2 + 1) coefficients.
struct HalfSpectrum {
  std::size_t rows = 0;
  std::size_t cols = 0;  // real-domain column count
  std::vector<Complex> coeffs;

  std::size_t half_cols() const noexcept { return cols / 2 + 1; }
};

inline HalfSpectrum forward_real(const Matrix& m) {
  const std::size_t rows = m.height(), cols = m.width();
  HalfSpectrum out{rows, cols, {}};
  const std::size_t half = rows * out.half_cols();
  auto in = detail::fftw_alloc<double>(rows * cols);
  auto spec = detail::fftw_alloc<fftw_complex>(half);
  std::copy(m.data().begin(), m.data().end(), in.get());
  fftw_execute_dft_r2c(detail::PlanCache::instance().get(detail::Kind::r2c, rows, cols), in.get(),
                       spec.get());
  out.coeffs.resize(half);
  for (std::size_t i = 0; i < half; ++i) out.coeffs[i] = {spec[i][0], spec[i][1]};
  return out;
}

// Unnormalized inverse: returns rows*cols times the true inverse.
inline Matrix inverse_real(const HalfSpectrum& s) {
  const std::size_t half = s.rows * s.half_cols();
  auto spec = detail::fftw_alloc<fftw_complex>(half);
  for (std::size_t i = 0; i < half; ++i) {
    spec[i][0] = s.coeffs[i].real();
    spec[i][1] = s.coeffs[i].imag();
  }
  auto out = detail::fftw_alloc<double>(s.rows * s.cols);
  fftw_execute_dft_c2r(detail::PlanCache::instance().get(detail::Kind::c2r, s.rows, s.cols),
                       spec.get(), out.get());
  Matrix m(s.cols, s.rows);
  std::copy(out.get(), out.get() + s.rows * s.cols, m.data().begin());
  return m;
}

// Full complex spectrum, row-major rows x cols.
inline std::vector<Complex> forward_full(const Matrix& m) {
  const std::size_t rows = m.height(), cols = m.width(), n = rows * cols;
  auto in = detail::fftw_alloc<fftw_complex>(n);
  auto out = detail::fftw_alloc<fftw_complex>(n);
  for (std::size_t i = 0; i < n; ++i) {
    in[i][0] = m[i];
    in[i][1] = 0.0;
  }
  fftw_execute_dft(detail::PlanCache::instance().get(detail::Kind::c2c_forward, rows, cols),
                   in.get(), out.get());
  std::vector<Complex> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = {out[i][0], out[i][1]};
  return v;
}

// Normalized inverse of a full spectrum; the imaginary part is discarded.
inline Matrix inverse_full_real(const std::vector<Complex>& spec, std::size_t rows, std::size_t cols) {
  const std::size_t n = rows * cols;
  auto in = detail::fftw_alloc<fftw_complex>(n);
  auto out = detail::fftw_alloc<fftw_complex>(n);
  for (std::size_t i = 0; i < n; ++i) {
    in[i][0] = spec[i].real();
    in[i][1] = spec[i].imag();
  }
  fftw_execute_dft(detail::PlanCache::instance().get(detail::Kind::c2c_backward, rows, cols),
                   in.get(), out.get());
  Matrix m(cols, rows);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = out[i][0] * scale;
  return m;
}

}  // namespace prnulab::fft
