#include <gtest/gtest.h>

#include "prnulab/denoiser.hpp"
#include "support.hpp"

using namespace prnulab;
using prnulab::testing::random_matrix;
using prnulab::testing::random_plane;

TEST(Wavelet, FilterBankIsOrthonormal) {
  double ss = 0.0, sum = 0.0, cross = 0.0;
  for (std::size_t k = 0; k < wavelet::kTaps; ++k) {
    ss += wavelet::kDecLow[k] * wavelet::kDecLow[k];
    sum += wavelet::kDecLow[k];
    cross += wavelet::kDecLow[k] * wavelet::kDecHigh[k];
  }
  EXPECT_NEAR(ss, 1.0, 1e-15);
  EXPECT_NEAR(sum, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(cross, 0.0, 1e-15);
}

TEST(Wavelet, PerfectReconstructionOnOddSizes) {
  for (Dims d : {Dims{64, 64}, Dims{67, 53}, Dims{9, 130}}) {
    auto m = random_matrix(d, d.width * 1000 + d.height, 40.0, 100.0);
    auto back = wavelet::reconstruct(wavelet::decompose(m, 3));
    ASSERT_EQ(back.dims(), d);
    for (std::size_t i = 0; i < m.size(); ++i) ASSERT_NEAR(back[i], m[i], 1e-10);
  }
}

TEST(Wavelet, BandLengthsGrowByFilterOverhang) {
  auto dec = wavelet::decompose(Matrix(64, 32), 2);
  EXPECT_EQ(dec.levels[0].hh.dims(), (Dims{35, 19}));
  EXPECT_EQ(dec.approximation.dims(), (Dims{21, 13}));
}

TEST(Denoiser, ResidualPlusDenoisedIsImage) {
  auto img = random_plane({96, 80}, 1);
  auto w = extract_residual(img);
  auto dn = denoise(img);
  for (std::size_t i = 0; i < w.values.size(); ++i) EXPECT_NEAR(w.values[i] + dn[i], img.samples()[i], 1e-12);
}

TEST(Denoiser, ConstantImageHasZeroResidual) {
  ImagePlane img(Matrix(128, 128, 173.0));
  auto w = extract_residual(img);
  for (double v : w.values.data()) EXPECT_EQ(v, 0.0);
}

TEST(Denoiser, ResidualKeepsShapeForNonDyadicSizes) {
  auto img = random_plane({100, 77}, 2);
  EXPECT_EQ(extract_residual(img).dims(), img.dims());
}

TEST(Denoiser, HighSigmaLeavesMoreNoiseInResidual) {
  auto base = random_matrix({128, 128}, 3, 3.0, 128.0);
  auto img = ImagePlane::clamped(base);
  DenoiserParams weak, strong;
  weak.sigma0 = 1.0;
  strong.sigma0 = 5.0;
  auto energy = [](const NoiseResidual& w) {
    double s = 0.0;
    for (double v : w.values.data()) s += v * v;
    return s;
  };
  EXPECT_GT(energy(extract_residual(img, strong)), energy(extract_residual(img, weak)));
}

TEST(Denoiser, ResidualTracksAdditiveWhiteNoise) {
  // Smooth content plus white noise: the residual should be close to the noise.
  const Dims d{128, 128};
  Matrix smooth(d);
  for (std::size_t r = 0; r < d.height; ++r)
    for (std::size_t c = 0; c < d.width; ++c) smooth(r, c) = 100.0 + 0.3 * r + 0.2 * c;
  auto noise = random_matrix(d, 4, 3.0);
  Matrix noisy = smooth;
  for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] += noise[i];
  auto w = extract_residual(ImagePlane::clamped(noisy));
  EXPECT_GT(correlation(w.values, noise), 0.7);
}

TEST(Denoiser, TooSmallForLevelsIsDecompositionError) {
  auto img = random_plane({64, 64}, 5);
  DenoiserParams p;
  p.levels = 7;
  try {
    extract_residual(img, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::decomposition);
  }
}

TEST(Denoiser, InvalidParamsAreConfigErrors) {
  DenoiserParams p;
  p.sigma0 = 0.0;
  p.variance_windows = {4};
  try {
    p.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    EXPECT_NE(std::string(e.what()).find("sigma0"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("window 4"), std::string::npos);
  }
}

TEST(Denoiser, LocalVarianceUsesClippedWindows) {
  Matrix c(5, 5, 0.0);
  c(0, 0) = 4.0;  // c^2 = 16
  auto v = detail::local_signal_variance(c, 1.0, {3});
  EXPECT_DOUBLE_EQ(v(0, 0), 16.0 / 4.0 - 1.0);  // 2x2 in-bounds cells
  EXPECT_DOUBLE_EQ(v(1, 1), std::max(0.0, 16.0 / 9.0 - 1.0));
  EXPECT_DOUBLE_EQ(v(4, 4), 0.0);
}

TEST(Denoiser, GlobalOffsetDoesNotChangeResidual) {
  auto base = random_matrix({96, 96}, 6, 20.0, 120.0);
  auto a = ImagePlane::clamped(base);
  Matrix shifted = a.samples();
  for (double& v : shifted.data()) v += 10.0;
  auto wa = extract_residual(a);
  auto wb = extract_residual(ImagePlane(shifted));
  for (std::size_t i = 0; i < wa.values.size(); ++i) EXPECT_NEAR(wa.values[i], wb.values[i], 1e-9);
}

TEST(Denoiser, WhiteNoiseMostlySurvivesInResidual) {
  auto noise = random_matrix({128, 128}, 7, 5.0, 128.0);
  DenoiserParams p;
  p.sigma0 = 5.0;
  auto w = extract_residual(ImagePlane::clamped(noise), p);
  const double mu = mean(noise);
  double in = 0.0, out = 0.0;
  for (std::size_t i = 0; i < noise.size(); ++i) {
    in += (noise[i] - mu) * (noise[i] - mu);
    out += w.values[i] * w.values[i];
  }
  EXPECT_GE(out, 0.8 * in);
}

TEST(Denoiser, ResidualIsNearlyZeroMeanOnTexture) {
  auto img = random_plane({128, 96}, 8);
  EXPECT_LE(std::abs(mean(extract_residual(img).values)), 0.5);
}

TEST(Denoiser, RepeatedCallsAreBitIdentical) {
  auto img = random_plane({80, 72}, 9);
  EXPECT_EQ(extract_residual(img).values, extract_residual(img).values);
}

TEST(WienerSubband, ZeroBandStaysZero) {
  auto out = wiener_subband(Matrix(16, 16, 0.0), 5.0, {3, 5});
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(WienerSubband, StrongSignalPassesThrough) {
  auto c = random_matrix({32, 32}, 10, 1000.0);
  auto out = wiener_subband(c, 1.0, {3, 5, 7, 9});
  for (std::size_t i = 0; i < c.size(); ++i)
    if (std::abs(c[i]) > 10.0) EXPECT_NEAR(out[i] / c[i], 1.0, 0.05);
}

TEST(WienerSubband, SignalEqualToNoiseIsHalved) {
  // c^2 = 2 sigma0^2 everywhere, so the signal variance estimate equals sigma0^2.
  const double sigma0 = 3.0, c = std::sqrt(2.0) * sigma0;
  Matrix band(12, 12);
  for (std::size_t i = 0; i < band.size(); ++i) band[i] = (i % 3 == 0) ? -c : c;
  auto out = wiener_subband(band, sigma0, {3, 5, 7, 9});
  for (std::size_t i = 0; i < band.size(); ++i) EXPECT_NEAR(out[i], 0.5 * band[i], 1e-12);
}
