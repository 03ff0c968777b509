// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "prnulab/campaign.hpp"
#include "prnulab/curation.hpp"
#include "prnulab/fingerprint.hpp"
#include "prnulab/matcher.hpp"
#include "prnulab/synthcam.hpp"
#include "support.hpp"

using namespace prnulab;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("CRITERION %d %s: %s (%s; %.1f s)\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---- 1 ---------------------------------------------------------------------

Outcome ncc_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  Rng dims_rng(2024);
  for (std::uint64_t pair = 0; pair < 100; ++pair) {
    const Dims d{2 + dims_rng.below(15), 2 + dims_rng.below(15)};
    const auto x = testing::random_matrix(d, 2 * pair + 1, 3.0, 1.0);
    const auto y = testing::random_matrix(d, 2 * pair + 2, 0.5, -2.0);
    const auto s = ncc_surface(x, y);
    for (std::size_t s1 = 0; s1 < d.height; ++s1)
      for (std::size_t s2 = 0; s2 < d.width; ++s2)
        worst = std::max(worst, std::abs(s.rho(s1, s2) - testing::direct_ncc(x, y, s1, s2)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-8 && secs < 10.0, "max |fft - direct| = " + fmt("%.3g", worst) + " over 100 pairs"};
}

// ---- 2 ---------------------------------------------------------------------

Outcome pce_arithmetic() {
  CorrelationSurface peaked{Matrix(Dims{10, 10}, 0.1), {}};
  peaked.rho(3, 7) = 0.5;
  peaked.peak_shift = find_peak(peaked.rho);
  MatcherParams r0;
  r0.neighborhood_radius = 0;
  const double p25 = pce(peaked, r0);

  CorrelationSurface flat{Matrix(Dims{10, 10}, 0.2), {}};
  flat.peak_shift = find_peak(flat.rho);
  const double p1 = pce(flat, r0);

  double worst_rel = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto x = testing::random_matrix({32, 24}, 100 + s);
    auto y = testing::random_matrix({32, 24}, 200 + s);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += 0.3 * x[(i + 37) % x.size()];
    const double base = pce(ncc_surface(x, y));
    Matrix xs = x, ys = y;
    for (double& v : xs.data()) v *= 7.25;
    for (double& v : ys.data()) v *= 0.013;
    worst_rel = std::max(worst_rel, std::abs(pce(ncc_surface(xs, ys)) - base) / base);
  }
  const bool ok = std::abs(p25 - 25.0) <= 1e-12 && std::abs(p1 - 1.0) <= 1e-12 && worst_rel <= 1e-9;
  return {ok, "peaked = " + fmt("%.15g", p25) + ", flat = " + fmt("%.15g", p1) +
                  ", scaling rel diff = " + fmt("%.3g", worst_rel)};
}

// ---- 3 ---------------------------------------------------------------------

Outcome estimator() {
  const Dims d{80, 64};
  const double c = 93.7;
  const auto w = NoiseResidual{testing::random_matrix(d, 5, 2.0)};
  const ImagePlane flat(Matrix(d, c));
  const auto one = finalize(accumulate({}, flat, w, "only"));
  std::size_t inexact = 0;
  for (std::size_t i = 0; i < d.area(); ++i) inexact += one.k[i] != w.values[i] / c;

  const auto img = testing::random_plane(d, 6);
  const auto w2 = NoiseResidual{testing::random_matrix(d, 7, 2.0)};
  const auto single = finalize(accumulate({}, img, w2, "a"));
  const auto doubled = finalize(accumulate(accumulate({}, img, w2, "a"), img, w2, "b"));
  const bool dup_ok = single.k == doubled.k;

  std::vector<std::pair<ImagePlane, NoiseResidual>> items;
  for (std::uint64_t i = 0; i < 25; ++i)
    items.emplace_back(testing::random_plane(d, 300 + i), NoiseResidual{testing::random_matrix(d, 400 + i, 2.0)});
  FingerprintAccumulator ref;
  for (auto& [im, res] : items) ref.accumulate(im, res, "x");
  const auto k_ref = finalize(ref).k;
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  double worst_rel = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng rng(s);
    rng.shuffle(order);
    FingerprintAccumulator acc;
    for (auto i : order) acc.accumulate(items[i].first, items[i].second, "x");
    const auto k = finalize(acc).k;
    for (std::size_t i = 0; i < k.size(); ++i)
      worst_rel = std::max(worst_rel, std::abs(k[i] - k_ref[i]) / std::max(std::abs(k_ref[i]), 1e-300));
  }
  const bool ok = inexact == 0 && dup_ok && worst_rel <= 1e-9;
  return {ok, std::to_string(inexact) + " pixels differ from w/c, duplication " + (dup_ok ? "invariant" : "changed k") +
                  ", shuffle rel diff = " + fmt("%.3g", worst_rel)};
}

// ---- 4 ---------------------------------------------------------------------

Outcome nua_postcondition() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    Fingerprint fp;
    fp.k = testing::random_matrix({96 + 8 * s, 64 + 4 * s}, 500 + s, 0.02, 0.01);
    for (std::size_t r = 0; r < fp.k.height(); ++r)
      for (std::size_t c = 0; c < fp.k.width(); ++c) fp.k(r, c) += 0.003 * static_cast<double>(r % 7) - 0.001 * (c % 3);
    const auto cleaned = remove_nua(fp);
    worst = std::max({worst, testing::max_abs_row_mean(cleaned.k), testing::max_abs_col_mean(cleaned.k)});
  }
  Fingerprint rows;
  rows.k = Matrix(Dims{80, 60});
  for (std::size_t r = 0; r < 60; ++r)
    for (std::size_t c = 0; c < 80; ++c) rows.k(r, c) = 0.01 * std::sin(0.3 * static_cast<double>(r)) + 0.002;
  const auto lin = remove_nua(rows, {true, false});
  double residue = 0.0;
  for (double v : lin.k.data()) residue = std::max(residue, std::abs(v));
  return {worst <= 1e-9 && residue <= 1e-15,
          "max |row or column mean| = " + fmt("%.3g", worst) + ", row pattern residue = " + fmt("%.3g", residue)};
}

// ---- 5-8 -------------------------------------------------------------------

synth::ScenarioSpec acceptance_spec(bool shared) {
  auto spec = synth::independent_users(5, 50, 20, {512, 512}, 0);
  spec.strength = 0.05;
  spec.nua.jpeg_quality = 95;
  if (shared) {
    spec.nua.shared_pattern_id = "vendor-pipeline";
    spec.nua.shared_pattern_amplitude = 2.0;
  }
  return spec;
}

struct ScenarioRun {
  CampaignConfig config;
  CampaignResult result;
  double seconds = 0.0;
};

ScenarioRun run_scenario(const synth::ScenarioSource& src, const std::string& name) {
  ScenarioRun run;
  run.config.units.push_back({name, src.spec().model, src.spec().dims, "", src.user_sets()});
  const auto t0 = Clock::now();
  run.result = run_campaign(run.config, src, default_workers());
  run.seconds = seconds_since(t0);
  return run;
}

Outcome synthetic_tpr(const ScenarioRun& plain) {
  if (!plain.result.failures.empty()) return {false, plain.result.failures[0].error};
  const auto a = aggregate(plain.result, 60.0).at(0);
  const bool ok = a.tpr >= 0.95 && a.fpr <= 0.01 && a.mismatch_tests >= 200 && plain.seconds < 300.0;
  return {ok, "TPR = " + fmt("%.4f", a.tpr) + " (" + std::to_string(a.true_positives) + "/" +
                  std::to_string(a.match_tests) + "), FPR = " + fmt("%.4f", a.fpr) + " (" +
                  std::to_string(a.false_positives) + "/" + std::to_string(a.mismatch_tests) +
                  "), campaign " + fmt("%.0f", plain.seconds) + " s"};
}

Outcome phenomenon(const ScenarioRun& plain, const ScenarioRun& shared) {
  if (!shared.result.failures.empty()) return {false, shared.result.failures[0].error};
  const auto p = aggregate(plain.result, 60.0).at(0);
  const auto s = aggregate(shared.result, 60.0).at(0);
  const double ratio = s.mismatch_pce.median / p.mismatch_pce.median;
  return {s.fpr > 0.10 && ratio >= 10.0,
          "shared FPR = " + fmt("%.4f", s.fpr) + ", mismatch median " + fmt("%.1f", s.mismatch_pce.median) +
              " vs " + fmt("%.1f", p.mismatch_pce.median) + " (x" + fmt("%.1f", ratio) + ")"};
}

Outcome threshold_no_fix(const ScenarioRun& shared) {
  bool ok = true;
  std::string detail;
  for (double tau : {60.0, 120.0, 300.0}) {
    const auto a = aggregate(shared.result, tau).at(0);
    if (a.fpr < 0.01 && a.tpr > 0.90) ok = false;
    detail += (detail.empty() ? "" : ", ") + std::string("tau ") + fmt("%.0f", tau) + ": FPR " + fmt("%.3f", a.fpr) +
              " TPR " + fmt("%.3f", a.tpr);
  }
  return {ok, detail};
}

Outcome bookkeeping(const ScenarioRun& plain) {
  const auto& unit = plain.config.units.at(0);
  std::string problem;
  for (const auto& u : unit.users) {
    std::size_t match = 0, mismatch = 0;
    for (const auto& r : plain.result.records) {
      if (r.fingerprint_user != u.user_id) continue;
      (r.phase == Phase::match ? match : mismatch)++;
    }
    const std::size_t nt = u.test.size();
    const std::size_t want = nt >= 200 ? 0 : std::min<std::size_t>(200 - nt, mismatch_pool_size(unit, u.user_id));
    if (match != nt || mismatch != want)
      problem += " " + u.user_id + ": " + std::to_string(match) + "/" + std::to_string(mismatch);
  }
  // Aggregates written to disk must equal a recount of the written records.
  const auto dir = std::filesystem::temp_directory_path() / "prnulab_acceptance_outputs";
  std::filesystem::remove_all(dir);
  write_campaign_outputs(plain.result, plain.config, dir);
  const auto records = read_records_csv(dir / "records.csv");
  std::ifstream in(dir / "aggregates.json");
  const auto agg = json::parse(in).at("units").at(0);
  std::size_t tp = 0, nm = 0, fp = 0, nx = 0;
  for (const auto& r : records) {
    if (r.phase == Phase::match) {
      ++nm;
      tp += r.report.pce > 60.0;
    } else {
      ++nx;
      fp += r.report.pce > 60.0;
    }
  }
  const bool agg_ok = agg.at("true_positives").get<std::size_t>() == tp &&
                      agg.at("match_tests").get<std::size_t>() == nm &&
                      agg.at("false_positives").get<std::size_t>() == fp &&
                      agg.at("mismatch_tests").get<std::size_t>() == nx &&
                      agg.at("tpr").get<double>() == static_cast<double>(tp) / static_cast<double>(nm) &&
                      agg.at("fpr").get<double>() == static_cast<double>(fp) / static_cast<double>(nx);
  std::filesystem::remove_all(dir);
  return {problem.empty() && agg_ok, "per-user counts " + (problem.empty() ? std::string("match") : "off:" + problem) +
                                         ", aggregates " + (agg_ok ? "equal" : "differ from") + " recount of " +
                                         std::to_string(records.size()) + " records"};
}

// ---- 9 ---------------------------------------------------------------------

ExifRecord phone(double focal) {
  ExifRecord e;
  e.make = "Apple";
  e.model = "iPhone 6";
  e.software = "10.3.1";
  e.focal_length = focal;
  e.digital_zoom = 1.0;
  e.pixel_dims = {3264, 2448};
  return e;
}

std::string img_id(const char* user, int n) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%s/IMG_%04d.jpg", user, n);
  return buf;
}

Outcome curation_fixture() {
  CurationRules rules;
  rules.expected_make = "Apple";
  rules.expected_model = "iPhone 6";
  rules.max_resolution = {3264, 2448};
  rules.software_blacklist = load_blacklist(PRNULAB_DEFAULT_BLACKLIST);

  std::vector<ImageEntry> alice;
  for (int n = 1; n <= 48; ++n) {
    auto e = phone(4.15);
    switch (n) {
      case 1: e.make.reset(); break;
      case 2: e.model = "  "; break;
      case 3: e.model = "iPhone 6 Plus"; break;
      case 4: e.make = "Samsung"; break;
      case 5: e.pixel_dims = {1920, 1080}; break;
      case 6: e.software = "Adobe Photoshop CC 2015 (Macintosh)"; break;
      case 7: e.software = "GIMP 2.8.16"; break;
      case 8:
      case 9: e.focal_length = 6.0; break;
      case 10: e.focal_length.reset(); break;
      case 12: e.pixel_dims = {2448, 3264}; break;
      case 15: e.make = " APPLE "; break;
      case 20:
      case 30: e.digital_zoom = 2.0; break;
      case 25: e.digital_zoom.reset(); break;
      default: break;
    }
    alice.push_back({img_id("alice", n), e});
  }
  std::vector<ImageEntry> bob;
  for (int n = 1; n <= 12; ++n) {
    auto e = phone(n <= 5 ? 3.99 : 4.2);
    if (n > 10) e.model.reset();
    bob.push_back({img_id("bob", n), e});
  }

  // Golden partition, written out by hand from the rules.
  std::vector<std::string> golden_ref;
  for (int n = 11; n <= 47; ++n)
    if (n != 20 && n != 30) golden_ref.push_back(img_id("alice", n));
  const std::vector<std::string> golden_test = {img_id("alice", 20), img_id("alice", 30), img_id("alice", 48)};
  const std::vector<Discarded> golden_discard = {
      {img_id("alice", 1), "missing-make-model"},  {img_id("alice", 2), "missing-make-model"},
      {img_id("alice", 3), "model-mismatch"},      {img_id("alice", 4), "model-mismatch"},
      {img_id("alice", 5), "wrong-resolution"},    {img_id("alice", 6), "software-blacklisted"},
      {img_id("alice", 7), "software-blacklisted"}, {img_id("alice", 8), "focal-length-mismatch"},
      {img_id("alice", 9), "focal-length-mismatch"}, {img_id("alice", 10), "focal-length-absent"}};

  std::string diff;
  const auto a = curate_user("alice", alice, rules);
  if (a.set.reference != golden_ref) diff += " alice reference";
  if (a.set.test != golden_test) diff += " alice test";
  if (a.set.discarded != golden_discard) diff += " alice discards";
  if (!a.log.empty()) diff += " alice log";
  if (a.set.reference.size() + a.set.test.size() + a.set.discarded.size() != alice.size()) diff += " alice total";

  try {
    curate_user("bob", bob, rules);
    diff += " bob accepted";
  } catch (const InsufficientReferenceError& e) {
    if (e.shortfall() != 15) diff += " bob shortfall " + std::to_string(e.shortfall());
  }
  std::vector<ImageEntry> bob_passed;
  for (const auto& im : bob)
    if (!filter_image(im.exif, rules)) bob_passed.push_back(im);
  const auto focal = focal_mode_filter(bob_passed);
  if (!focal.mode || *focal.mode != 3.99 || focal.tied_values != std::vector<double>{3.99, 4.2} ||
      focal.kept.size() != 5 || focal.dropped.size() != 5)
    diff += " bob focal mode";

  return {diff.empty(), diff.empty() ? "60 records partitioned exactly as the golden manifest" : "mismatch:" + diff};
}

// ---- 10 --------------------------------------------------------------------

Outcome rotation_search(const synth::ScenarioSource& src) {
  const auto& user = src.user_sets().at(0);
  const auto fp = build_fingerprint(user.reference, src, {}, {}, default_workers());
  const auto img = src.load(user.test.at(0)).plane;
  const auto w = extract_residual(img);
  const auto base = match_image(fp, img, w);
  bool ok = base.decision && base.rotation == 0;
  std::string detail = "unrotated PCE " + fmt("%.2f", base.pce);
  for (int q = 1; q < 4; ++q) {
    const ImagePlane rotated(rotate_ccw(img.samples(), q));
    const NoiseResidual rotated_w{rotate_ccw(w.values, q)};
    const auto r = match_image(fp, rotated, rotated_w);
    const double rel = std::abs(r.pce - base.pce) / base.pce;
    ok = ok && r.decision && r.rotation == 90 * q && rel <= 1e-6;
    detail += ", " + std::to_string(90 * q) + " deg -> reported " + std::to_string(r.rotation) + " rel " +
              fmt("%.2g", rel);
  }
  return {ok, detail};
}

}  // namespace

int main() {
  std::printf("prnulab %s acceptance\n", PRNULAB_VERSION);
  report(1, "FFT correlation equals direct evaluation", ncc_oracle);
  report(2, "PCE arithmetic", pce_arithmetic);
  report(3, "fingerprint estimator", estimator);
  report(4, "NUA removal postcondition", nua_postcondition);

  const synth::ScenarioSource plain_src(acceptance_spec(false));
  const synth::ScenarioSource shared_src(acceptance_spec(true));
  ScenarioRun plain, shared;
  bool plain_ran = false, shared_ran = false;
  auto ensure_plain = [&] {
    if (!plain_ran) plain = run_scenario(plain_src, "synthetic-independent");
    plain_ran = true;
  };
  auto ensure_shared = [&] {
    if (!shared_ran) shared = run_scenario(shared_src, "synthetic-shared");
    shared_ran = true;
  };
  report(5, "synthetic TPR/FPR without shared artifacts", [&] {
    ensure_plain();
    return synthetic_tpr(plain);
  });
  report(6, "shared artifact inflates mismatch PCE", [&] {
    ensure_plain();
    ensure_shared();
    return phenomenon(plain, shared);
  });
  report(7, "no threshold removes the false positives", [&] {
    ensure_shared();
    return threshold_no_fix(shared);
  });
  report(8, "protocol bookkeeping", [&] {
    ensure_plain();
    return bookkeeping(plain);
  });
  report(9, "curation rules on the 60-record fixture", curation_fixture);
  report(10, "rotation search", [&] { return rotation_search(plain_src); });

  std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
