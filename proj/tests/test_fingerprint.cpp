#include <gtest/gtest.h>

#include <filesystem>

#include "prnulab/fingerprint.hpp"
#include "support.hpp"

using namespace prnulab;
using prnulab::testing::max_abs_col_mean;
using prnulab::testing::max_abs_row_mean;
using prnulab::testing::random_matrix;
using prnulab::testing::random_plane;

namespace {

NoiseResidual random_residual(Dims d, std::uint64_t seed) { return {random_matrix(d, seed, 2.0)}; }

double max_rel_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-300});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST(Accumulate, SingleConstantImage) {
  const Dims d{64, 64};
  ImagePlane img(Matrix(d, 40.0));
  auto w = random_residual(d, 1);
  auto acc = accumulate({}, img, w, "a");
  for (std::size_t i = 0; i < d.area(); ++i) {
    EXPECT_EQ(acc.numerator()[i], 40.0 * w.values[i]);
    EXPECT_EQ(acc.denominator()[i], 1600.0);
  }
  auto fp = finalize(acc);
  EXPECT_FALSE(fp.cleaned);
  for (std::size_t i = 0; i < d.area(); ++i) EXPECT_EQ(fp.k[i], w.values[i] / 40.0);
}

TEST(Accumulate, SamePairTwiceDoublesSumsAndKeepsRatio) {
  const Dims d{64, 70};
  auto img = random_plane(d, 2);
  auto w = random_residual(d, 3);
  auto once = accumulate({}, img, w, "a");
  auto twice = accumulate(once, img, w, "b");
  EXPECT_EQ(twice.count(), 2u);
  for (std::size_t i = 0; i < d.area(); ++i) {
    EXPECT_EQ(twice.numerator()[i], 2.0 * once.numerator()[i]);
    EXPECT_EQ(twice.denominator()[i], 2.0 * once.denominator()[i]);
  }
  EXPECT_EQ(finalize(twice).k, finalize(once).k);
}

TEST(Accumulate, ShapeMismatchIsRejected) {
  auto acc = accumulate({}, random_plane({64, 64}, 4), random_residual({64, 64}, 5), "a");
  try {
    acc.accumulate(random_plane({64, 72}, 6), random_residual({64, 72}, 7), "odd.png");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape);
    EXPECT_NE(std::string(e.what()).find("odd.png"), std::string::npos);
  }
}

TEST(Accumulate, OrderDoesNotMatterBeyondTolerance) {
  const Dims d{64, 64};
  std::vector<std::pair<ImagePlane, NoiseResidual>> items;
  for (std::uint64_t i = 0; i < 20; ++i) items.emplace_back(random_plane(d, 10 + i), random_residual(d, 40 + i));
  FingerprintAccumulator ref;
  for (auto& [img, w] : items) ref.accumulate(img, w, "x");
  const auto k_ref = finalize(ref).k;
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng rng(s);
    rng.shuffle(order);
    FingerprintAccumulator acc;
    for (auto i : order) acc.accumulate(items[i].first, items[i].second, "x");
    EXPECT_LE(max_rel_diff(finalize(acc).k, k_ref), 1e-9);
  }
}

TEST(Accumulate, MergeEqualsSequential) {
  const Dims d{64, 64};
  FingerprintAccumulator all, left, right;
  for (std::uint64_t i = 0; i < 6; ++i) {
    auto img = random_plane(d, 70 + i);
    auto w = random_residual(d, 80 + i);
    all.accumulate(img, w, std::to_string(i));
    (i < 3 ? left : right).accumulate(img, w, std::to_string(i));
  }
  left.merge(right);
  EXPECT_EQ(left.count(), 6u);
  EXPECT_LE(max_rel_diff(finalize(left).k, finalize(all).k), 1e-12);
}

TEST(Finalize, EmptyAccumulatorIsAnError) {
  try {
    finalize(FingerprintAccumulator{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_accumulator);
  }
}

TEST(Finalize, DeadPixelsGetZero) {
  const Dims d{64, 64};
  Matrix px(d, 100.0);
  px(5, 7) = 0.0;
  auto w = random_residual(d, 8);
  auto fp = finalize(accumulate({}, ImagePlane(px), w, "a"));
  EXPECT_EQ(fp.k(5, 7), 0.0);
  EXPECT_TRUE(all_finite(fp.k));
}

TEST(Finalize, ScaleEquivariantInResidual) {
  const Dims d{64, 64};
  auto img = random_plane(d, 9);
  auto w = random_residual(d, 10);
  NoiseResidual w3{w.values};
  for (double& v : w3.values.data()) v *= 3.0;
  auto k1 = finalize(accumulate({}, img, w, "a")).k;
  auto k3 = finalize(accumulate({}, img, w3, "a")).k;
  for (std::size_t i = 0; i < k1.size(); ++i) EXPECT_NEAR(k3[i], 3.0 * k1[i], 1e-12 * std::abs(k3[i]) + 1e-300);
}

TEST(RemoveNua, RowPatternVanishes) {
  Fingerprint fp;
  fp.k = Matrix(64, 48);
  for (std::size_t r = 0; r < 48; ++r)
    for (std::size_t c = 0; c < 64; ++c) fp.k(r, c) = std::sin(0.3 * static_cast<double>(r)) + 0.1 * r;
  auto out = remove_nua(fp, {true, false});
  for (double v : out.k.data()) EXPECT_NEAR(v, 0.0, 1e-12);
  EXPECT_TRUE(out.cleaned);
}

TEST(RemoveNua, RowAndColumnMeansVanish) {
  Fingerprint fp;
  fp.k = random_matrix({80, 64}, 11, 1.0, 5.0);
  for (std::size_t r = 0; r < 64; ++r)
    for (std::size_t c = 0; c < 80; ++c) fp.k(r, c) += 0.5 * (r % 3) - 0.2 * (c % 7);
  auto out = remove_nua(fp);
  EXPECT_LE(max_abs_row_mean(out.k), 1e-9);
  EXPECT_LE(max_abs_col_mean(out.k), 1e-9);
  auto again = remove_nua(out);
  EXPECT_LE(max_abs_row_mean(again.k), 1e-9);
  EXPECT_LE(max_abs_col_mean(again.k), 1e-9);
}

TEST(RemoveNua, CheckerboardPeakIsFlattened) {
  auto spectral_peak_ratio = [](const Matrix& m) {
    auto spec = fft::forward_full(m);
    double mx = 0.0, sum = 0.0;
    for (auto& c : spec) {
      mx = std::max(mx, std::abs(c));
      sum += std::abs(c);
    }
    return mx / (sum / static_cast<double>(spec.size()));
  };
  Fingerprint fp;
  fp.k = random_matrix({64, 64}, 12, 0.2);
  for (std::size_t r = 0; r < 64; ++r)
    for (std::size_t c = 0; c < 64; ++c) fp.k(r, c) += ((r + c) % 2 == 0) ? 1.0 : -1.0;
  const double before = spectral_peak_ratio(fp.k);
  const double after = spectral_peak_ratio(remove_nua(fp).k);
  EXPECT_GE(before / after, 10.0) << before << " -> " << after;
}

TEST(RemoveNua, ProvenanceRecordsToggles) {
  Fingerprint fp;
  fp.k = random_matrix({64, 64}, 13);
  auto a = remove_nua(fp, {true, false});
  auto b = remove_nua(fp, {true, true});
  EXPECT_NE(a.params_digest(), b.params_digest());
  EXPECT_FALSE(a.provenance.nua.whitening);
}

TEST(BuildFingerprint, IndependentOfWorkerCount) {
  MemoryImageSource src;
  std::vector<std::string> ids;
  for (int i = 0; i < 19; ++i) {
    auto id = "img" + std::to_string(i);
    src.add(id, {random_plane({64, 64}, 500 + static_cast<std::uint64_t>(i)), {}});
    ids.push_back(id);
  }
  auto serial = build_fingerprint(ids, src, {}, {}, 1);
  std::reverse(ids.begin(), ids.end());
  auto parallel = build_fingerprint(ids, src, {}, {}, 4);
  EXPECT_EQ(serial.k, parallel.k);
  EXPECT_EQ(serial.params_digest(), parallel.params_digest());
  EXPECT_EQ(serial.provenance.source_ids.size(), 19u);
}

TEST(BuildFingerprint, MixedDimensionsNameTheOffender) {
  MemoryImageSource src;
  src.add("a", {random_plane({64, 64}, 1), {}});
  src.add("b", {random_plane({64, 64}, 2), {}});
  src.add("c", {random_plane({72, 64}, 3), {}});
  try {
    build_fingerprint({"a", "b", "c"}, src);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape);
    EXPECT_NE(std::string(e.what()).find("'c'"), std::string::npos) << e.what();
  }
}

TEST(FingerprintFile, RoundTripsBitExactly) {
  Fingerprint fp;
  fp.k = random_matrix({65, 64}, 14, 1e-3);
  fp.k[0] = -0.0;
  fp.k[1] = 1e-310;
  fp.provenance.source_ids = {"x.jpg", "y.jpg"};
  fp = remove_nua(fp, {true, false});
  auto bytes = serialize_fingerprint(fp);
  ASSERT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "PRNUFP01");
  auto back = deserialize_fingerprint(bytes);
  EXPECT_EQ(back.dims(), fp.dims());
  EXPECT_TRUE(back.cleaned);
  for (std::size_t i = 0; i < fp.k.size(); ++i)
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back.k[i]), std::bit_cast<std::uint64_t>(fp.k[i]));
  EXPECT_EQ(back.params_digest(), fp.params_digest());
  EXPECT_EQ(back.provenance.source_ids, fp.provenance.source_ids);
}

TEST(FingerprintFile, RejectsBadMagicAndTruncation) {
  Fingerprint fp;
  fp.k = random_matrix({64, 64}, 15);
  fp.provenance.source_ids = {"a"};
  auto bytes = serialize_fingerprint(fp);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_fingerprint(bad), Error);
  bytes.resize(bytes.size() / 2);
  EXPECT_THROW(deserialize_fingerprint(bytes), Error);
}
