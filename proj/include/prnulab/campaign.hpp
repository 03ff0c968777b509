#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "prnulab/curation.hpp"
#include "prnulab/fingerprint.hpp"
#include "prnulab/matcher.hpp"
#include "prnulab/source.hpp"
#include "prnulab/util.hpp"

namespace prnulab {

enum class Phase { match, mismatch };

inline const char* to_string(Phase p) { return p == Phase::match ? "match" : "mismatch"; }

struct CampaignUnit {
  std::string name;
  std::string model;
  Dims resolution;
  std::string image_root;
  std::vector<UserImageSet> users;

  static CampaignUnit from_curated(const CuratedUnit& c) {
    return {c.name, c.model, c.resolution, c.image_root, c.users};
  }
};

namespace detail {

inline std::string normal_dir(const std::filesystem::path& p) {
  auto n = p.lexically_normal();
  if (!n.has_filename() && n.has_parent_path()) n = n.parent_path();
  return n.string();
}

}  // namespace detail

struct CampaignConfig {
  std::vector<CampaignUnit> units;
  double tau = 60.0;
  std::size_t mismatch_budget = 200;
  MatcherParams matcher;
  DenoiserParams denoiser;
  NuaRemovalOptions nua;
  std::uint64_t seed = 0;
  std::vector<std::string> anomaly_patterns = {"Portrait HDR"};

  // Every violated field, one entry each.
  std::vector<std::string> problems() const {
    std::vector<std::string> bad;
    if (!(tau > 0.0) || !std::isfinite(tau)) bad.push_back("tau must be finite and > 0");
    if (mismatch_budget == 0) bad.push_back("mismatch_budget must be > 0");
    try {
      denoiser.validate();
    } catch (const Error& e) {
      bad.emplace_back(e.what());
    }
    if (units.empty()) bad.push_back("units is empty");
    std::set<std::string> names;
    for (const auto& u : units) {
      if (!names.insert(u.name).second) bad.push_back("unit '" + u.name + "' listed twice");
    }
    return bad;
  }

  void validate() const {
    auto bad = problems();
    if (bad.empty()) return;
    std::string msg = "campaign config:";
    for (const auto& b : bad) msg += " " + b + ";";
    throw Error(ErrorKind::config, msg);
  }

  MatcherParams effective_matcher() const {
    MatcherParams m = matcher;
    m.tau = tau;
    return m;
  }

  nlohmann::json to_json() const {
    nlohmann::json us = nlohmann::json::array();
    for (const auto& u : units) {
      nlohmann::json users = nlohmann::json::array();
      for (const auto& s : u.users) users.push_back({{"user_id", s.user_id}, {"reference", s.reference}, {"test", s.test}});
      us.push_back({{"name", u.name},
                    {"model", u.model},
                    {"resolution", {u.resolution.width, u.resolution.height}},
                    {"image_root", u.image_root},
                    {"users", users}});
    }
    return {{"tau", tau},
            {"mismatch_budget", mismatch_budget},
            {"seed", seed},
            {"matcher", {{"neighborhood_radius", matcher.neighborhood_radius}, {"two_sided_peak", matcher.two_sided_peak}}},
            {"denoiser",
             {{"sigma0", denoiser.sigma0}, {"levels", denoiser.levels}, {"variance_windows", denoiser.variance_windows}}},
            {"nua_removal", {{"zero_mean", nua.zero_mean}, {"whitening", nua.whitening}}},
            {"anomaly_patterns", anomaly_patterns},
            {"units", us}};
  }

  std::string digest() const { return sha256_hex(to_json().dump()); }

  // Reads a campaign file. Units are inline curated units or
  // {"curated": path} references resolved against base_dir.
  static CampaignConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                  std::vector<std::string>* defaulted = nullptr) {
    CampaignConfig c;
    auto note = [&](const char* field) {
      if (defaulted) defaulted->emplace_back(field);
    };
    try {
      if (j.contains("tau")) c.tau = j.at("tau").get<double>(); else note("tau");
      if (j.contains("mismatch_budget")) c.mismatch_budget = j.at("mismatch_budget").get<std::size_t>();
      else note("mismatch_budget");
      c.seed = j.value("seed", std::uint64_t{0});
      if (j.contains("matcher")) {
        const auto& m = j.at("matcher");
        c.matcher.neighborhood_radius = m.value("neighborhood_radius", c.matcher.neighborhood_radius);
        c.matcher.two_sided_peak = m.value("two_sided_peak", c.matcher.two_sided_peak);
      }
      if (j.contains("denoiser")) {
        const auto& d = j.at("denoiser");
        c.denoiser.sigma0 = d.value("sigma0", c.denoiser.sigma0);
        c.denoiser.levels = d.value("levels", c.denoiser.levels);
        c.denoiser.variance_windows = d.value("variance_windows", c.denoiser.variance_windows);
      }
      if (j.contains("nua_removal")) {
        const auto& n = j.at("nua_removal");
        c.nua.zero_mean = n.value("zero_mean", c.nua.zero_mean);
        c.nua.whitening = n.value("whitening", c.nua.whitening);
      } else {
        note("nua_removal");
      }
      c.anomaly_patterns = j.value("anomaly_patterns", c.anomaly_patterns);
      for (const auto& u : j.at("units")) {
        CuratedUnit cu;
        if (u.contains("curated")) {
          const auto path = base_dir / u.at("curated").get<std::string>();
          std::ifstream in(path);
          if (!in) throw Error(ErrorKind::io, "cannot read curated unit '" + path.string() + "'");
          cu = CuratedUnit::from_json(nlohmann::json::parse(in));
          if (std::filesystem::path(cu.image_root).is_relative())
            cu.image_root = detail::normal_dir(path.parent_path() / cu.image_root);
        } else {
          cu = CuratedUnit::from_json(u);
          if (std::filesystem::path(cu.image_root).is_relative())
            cu.image_root = detail::normal_dir(base_dir / cu.image_root);
        }
        c.units.push_back(CampaignUnit::from_curated(cu));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::config, std::string("campaign config: ") + e.what());
    }
    return c;
  }
};

struct TestRecord {
  std::string unit;
  std::string fingerprint_user;
  std::string image_user;
  Phase phase = Phase::match;
  PceReport report;
};

inline bool record_order(const TestRecord& a, const TestRecord& b) {
  return std::tie(a.unit, a.fingerprint_user, a.phase, a.report.image_id) <
         std::tie(b.unit, b.fingerprint_user, b.phase, b.report.image_id);
}

struct Quantiles {
  std::size_t count = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

// Linear interpolation between closest ranks (the common "type 7" rule).
inline Quantiles quantiles(std::vector<double> v) {
  Quantiles q;
  q.count = v.size();
  if (v.empty()) return q;
  std::sort(v.begin(), v.end());
  auto at = [&](double p) {
    const double h = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  q.min = v.front();
  q.q1 = at(0.25);
  q.median = at(0.5);
  q.q3 = at(0.75);
  q.max = v.back();
  return q;
}

inline nlohmann::json to_json(const Quantiles& q) {
  return {{"count", q.count}, {"min", q.min}, {"q1", q.q1}, {"median", q.median}, {"q3", q.q3}, {"max", q.max}};
}

struct UnitAggregate {
  std::string unit;
  std::string model;
  Dims resolution;
  std::size_t match_tests = 0;
  std::size_t true_positives = 0;
  std::size_t mismatch_tests = 0;
  std::size_t false_positives = 0;
  double tpr = 0.0;
  double fpr = 0.0;
  Quantiles match_pce;
  Quantiles mismatch_pce;
};

struct UnitFailure {
  std::string unit;
  std::string error;
};

struct CampaignResult {
  std::vector<TestRecord> records;  // sorted by record_order
  std::vector<CampaignUnit> units;
  std::map<std::string, ExifRecord> image_metadata;
  std::vector<UnitFailure> failures;
  std::vector<std::string> log;
  std::string config_digest;
};

// ---- planning --------------------------------------------------------------

// Mismatch draw for one fingerprint: the other users' images are shuffled
// per user, the user order is shuffled, then images are taken round-robin.
inline std::vector<std::pair<std::string, std::string>> sample_mismatch(const CampaignUnit& unit,
                                                                        const std::string& fingerprint_user,
                                                                        std::size_t count, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "mismatch", unit.name, fingerprint_user));
  std::vector<std::pair<std::string, std::vector<std::string>>> pools;
  for (const auto& u : unit.users) {
    if (u.user_id == fingerprint_user) continue;
    std::vector<std::string> ids = u.reference;
    ids.insert(ids.end(), u.test.begin(), u.test.end());
    std::sort(ids.begin(), ids.end());
    pools.emplace_back(u.user_id, std::move(ids));
  }
  std::sort(pools.begin(), pools.end());
  for (auto& [user, ids] : pools) rng.shuffle(ids);
  rng.shuffle(pools);
  std::vector<std::pair<std::string, std::string>> out;  // (image user, image id)
  for (std::size_t round = 0; out.size() < count; ++round) {
    bool any = false;
    for (const auto& [user, ids] : pools) {
      if (round >= ids.size()) continue;
      any = true;
      out.emplace_back(user, ids[round]);
      if (out.size() == count) break;
    }
    if (!any) break;
  }
  return out;
}

inline std::size_t mismatch_pool_size(const CampaignUnit& unit, const std::string& fingerprint_user) {
  std::size_t n = 0;
  for (const auto& u : unit.users)
    if (u.user_id != fingerprint_user) n += u.reference.size() + u.test.size();
  return n;
}

struct PlannedTest {
  std::string fingerprint_user;
  std::string image_user;
  Phase phase;
};

// ---- execution -------------------------------------------------------------

inline std::vector<TestRecord> run_unit(const CampaignUnit& unit, const CampaignConfig& config,
                                        const ImageSource& source, std::size_t workers,
                                        std::vector<std::string>& log,
                                        std::map<std::string, ExifRecord>* metadata = nullptr) {
  if (unit.users.size() < 2)
    throw Error(ErrorKind::no_mismatch_pool,
                "unit '" + unit.name + "' has " + std::to_string(unit.users.size()) + " user(s); mismatch tests need 2");
  const auto params = config.effective_matcher();
  params.validate();
  config.denoiser.validate();

  std::vector<Fingerprint> fingerprints(unit.users.size());
  parallel_for(unit.users.size(), workers, [&](std::size_t i) {
    fingerprints[i] = build_fingerprint(unit.users[i].reference, source, config.denoiser, config.nua, 1);
  });
  std::map<std::string, std::size_t> fp_index;
  for (std::size_t i = 0; i < unit.users.size(); ++i) fp_index[unit.users[i].user_id] = i;

  // Image-major plan: each image is decoded and denoised once and compared
  // against every fingerprint that needs it.
  std::map<std::string, std::vector<PlannedTest>> plan;
  for (const auto& u : unit.users) {
    for (const auto& id : u.test) plan[id].push_back({u.user_id, u.user_id, Phase::match});
    const std::size_t nt = u.test.size();
    if (nt >= config.mismatch_budget) {
      log.push_back("unit '" + unit.name + "' user '" + u.user_id + "': " + std::to_string(nt) +
                    " match tests exhaust the budget of " + std::to_string(config.mismatch_budget) +
                    "; mismatch phase skipped");
      continue;
    }
    const std::size_t want = config.mismatch_budget - nt;
    auto draw = sample_mismatch(unit, u.user_id, want, config.seed);
    if (draw.size() < want)
      log.push_back("unit '" + unit.name + "' user '" + u.user_id + "': mismatch pool holds " +
                    std::to_string(draw.size()) + " of the " + std::to_string(want) + " images requested");
    for (const auto& [image_user, id] : draw) plan[id].push_back({u.user_id, image_user, Phase::mismatch});
  }

  std::vector<std::pair<std::string, std::vector<PlannedTest>>> jobs(plan.begin(), plan.end());
  std::vector<std::vector<TestRecord>> slots(jobs.size());
  std::vector<ExifRecord> exifs(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t j) {
    const auto& [image_id, tests] = jobs[j];
    auto img = source.load(image_id);
    exifs[j] = img.exif;
    const auto w = extract_residual(img.plane, config.denoiser);
    std::map<std::pair<std::size_t, std::size_t>, PreparedTest> prepared;  // keyed by fingerprint dims
    for (const auto& t : tests) {
      const auto& fp = fingerprints[fp_index.at(t.fingerprint_user)];
      const auto key = std::make_pair(fp.dims().width, fp.dims().height);
      auto it = prepared.find(key);
      if (it == prepared.end()) it = prepared.emplace(key, prepare_test(img.plane, w, fp.dims())).first;
      TestRecord rec{unit.name, t.fingerprint_user, t.image_user, t.phase, match_prepared(fp, it->second, params)};
      rec.report.image_id = image_id;
      rec.report.fingerprint_id = t.fingerprint_user;
      slots[j].push_back(std::move(rec));
    }
  });
  std::vector<TestRecord> out;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    for (auto& r : slots[j]) out.push_back(std::move(r));
    if (metadata) (*metadata)[jobs[j].first] = exifs[j];
  }
  std::sort(out.begin(), out.end(), record_order);
  return out;
}

// Source factory per unit, so file-backed units can resolve relative ids.
using SourceForUnit = std::function<const ImageSource&(const CampaignUnit&)>;

inline CampaignResult run_campaign(const CampaignConfig& config, const SourceForUnit& source_for,
                                   std::size_t workers = 1) {
  config.validate();
  CampaignResult result;
  result.units = config.units;
  result.config_digest = config.digest();
  for (const auto& unit : config.units) {
    try {
      auto recs = run_unit(unit, config, source_for(unit), workers, result.log, &result.image_metadata);
      result.records.insert(result.records.end(), std::make_move_iterator(recs.begin()),
                            std::make_move_iterator(recs.end()));
    } catch (const Error& e) {
      result.failures.push_back({unit.name, e.what()});
      result.log.push_back("unit '" + unit.name + "' failed: " + e.what());
    }
  }
  std::sort(result.records.begin(), result.records.end(), record_order);
  return result;
}

inline CampaignResult run_campaign(const CampaignConfig& config, const ImageSource& source, std::size_t workers = 1) {
  return run_campaign(config, [&](const CampaignUnit&) -> const ImageSource& { return source; }, workers);
}

// ---- analysis --------------------------------------------------------------

// Aggregates are always derived from the records at the given threshold.
inline std::vector<UnitAggregate> aggregate(const CampaignResult& result, double tau) {
  std::vector<UnitAggregate> out;
  for (const auto& unit : result.units) {
    UnitAggregate a;
    a.unit = unit.name;
    a.model = unit.model;
    a.resolution = unit.resolution;
    std::vector<double> match, mismatch;
    for (const auto& r : result.records) {
      if (r.unit != unit.name) continue;
      const bool positive = decide(r.report.pce, tau);
      if (r.phase == Phase::match) {
        ++a.match_tests;
        a.true_positives += positive;
        match.push_back(r.report.pce);
      } else {
        ++a.mismatch_tests;
        a.false_positives += positive;
        mismatch.push_back(r.report.pce);
      }
    }
    a.tpr = a.match_tests ? static_cast<double>(a.true_positives) / static_cast<double>(a.match_tests) : 0.0;
    a.fpr = a.mismatch_tests ? static_cast<double>(a.false_positives) / static_cast<double>(a.mismatch_tests) : 0.0;
    a.match_pce = quantiles(std::move(match));
    a.mismatch_pce = quantiles(std::move(mismatch));
    out.push_back(std::move(a));
  }
  return out;
}

inline double percent_1dp(double fraction) { return std::round(fraction * 1000.0) / 10.0; }

struct FprRow {
  std::string unit;
  std::string model;
  Dims resolution;
  double fpr_percent = 0.0;
  double tpr_percent = 0.0;
  std::size_t false_positives = 0;
  std::size_t mismatch_tests = 0;
  std::size_t true_positives = 0;
  std::size_t match_tests = 0;
};

inline std::vector<FprRow> fpr_table(const CampaignResult& result, double tau) {
  if (result.records.empty()) throw Error(ErrorKind::lookup, "campaign result has no records");
  std::vector<FprRow> rows;
  for (const auto& a : aggregate(result, tau))
    rows.push_back({a.unit, a.model, a.resolution, percent_1dp(a.fpr), percent_1dp(a.tpr), a.false_positives,
                    a.mismatch_tests, a.true_positives, a.match_tests});
  return rows;
}

struct BreakdownRow {
  std::string image_user;
  Quantiles pce;
  std::size_t above_tau = 0;
  std::size_t match_records = 0;
  std::size_t mismatch_records = 0;
};

// PCE distribution of one fingerprint, grouped by the user who took the image.
inline std::vector<BreakdownRow> inter_user_breakdown(const CampaignResult& result, const std::string& unit,
                                                      const std::string& reference_user, double tau) {
  const auto u = std::find_if(result.units.begin(), result.units.end(), [&](const auto& x) { return x.name == unit; });
  if (u == result.units.end()) throw Error(ErrorKind::lookup, "unknown unit '" + unit + "'");
  if (std::none_of(u->users.begin(), u->users.end(), [&](const auto& s) { return s.user_id == reference_user; }))
    throw Error(ErrorKind::lookup, "user '" + reference_user + "' is not in unit '" + unit + "'");
  std::map<std::string, std::vector<const TestRecord*>> groups;
  for (const auto& r : result.records)
    if (r.unit == unit && r.fingerprint_user == reference_user) groups[r.image_user].push_back(&r);
  std::vector<BreakdownRow> rows;
  for (const auto& [user, recs] : groups) {
    BreakdownRow row;
    row.image_user = user;
    std::vector<double> values;
    for (const auto* r : recs) {
      values.push_back(r->report.pce);
      row.above_tau += decide(r->report.pce, tau);
      (r->phase == Phase::match ? row.match_records : row.mismatch_records)++;
    }
    row.pce = quantiles(std::move(values));
    rows.push_back(std::move(row));
  }
  return rows;
}

struct AnomalyFlag {
  std::string image_id;
  std::string fingerprint_user;
  std::string flag;
};

// False positives whose Custom Rendered tag contains one of the patterns.
inline std::vector<AnomalyFlag> flag_metadata_anomalies(const CampaignResult& result,
                                                        const std::map<std::string, ExifRecord>& records,
                                                        const std::vector<std::string>& patterns = {"Portrait HDR"}) {
  std::vector<AnomalyFlag> out;
  for (const auto& r : result.records) {
    if (r.phase != Phase::mismatch || !r.report.decision) continue;
    auto it = records.find(r.report.image_id);
    if (it == records.end() || !it->second.custom_rendered) continue;
    for (const auto& p : patterns)
      if (icontains(*it->second.custom_rendered, p)) {
        out.push_back({r.report.image_id, r.fingerprint_user, "custom-rendered: " + *it->second.custom_rendered});
        break;
      }
  }
  return out;
}

// ---- serialization ---------------------------------------------------------

inline std::vector<std::string> record_columns() {
  std::vector<std::string> cols(PceReport::kCsvColumns.begin(), PceReport::kCsvColumns.end());
  for (const char* extra : {"unit", "fingerprint_user", "image_user", "phase"}) cols.emplace_back(extra);
  return cols;
}

inline std::string csv_line(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    const auto& f = fields[i];
    if (f.find_first_of(",\"\n") == std::string::npos) {
      line += f;
    } else {
      line += '"';
      for (char c : f) line += c == '"' ? std::string("\"\"") : std::string(1, c);
      line += '"';
    }
  }
  return line + "\n";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline void write_records_csv(const std::filesystem::path& path, const std::vector<TestRecord>& records) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
  out << csv_line(record_columns());
  for (const auto& r : records) {
    auto f = r.report.csv_fields();
    f.insert(f.end(), {r.unit, r.fingerprint_user, r.image_user, to_string(r.phase)});
    out << csv_line(f);
  }
}

inline std::vector<TestRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const auto& c : record_columns())
    if (!col.count(c)) throw Error(ErrorKind::format, path.string() + ": missing column '" + c + "'");
  std::vector<TestRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw Error(ErrorKind::format, path.string() + ":" + std::to_string(line_no) + ": wrong field count");
    auto get = [&](const char* name) -> const std::string& { return f[col.at(name)]; };
    TestRecord r;
    try {
      r.unit = get("unit");
      r.fingerprint_user = get("fingerprint_user");
      r.image_user = get("image_user");
      r.phase = get("phase") == "match" ? Phase::match : Phase::mismatch;
      r.report.image_id = get("image_id");
      r.report.fingerprint_id = get("fingerprint_id");
      r.report.pce = std::stod(get("pce"));
      r.report.peak_shift = {std::stoul(get("s1")), std::stoul(get("s2"))};
      r.report.rotation = std::stoi(get("rotation"));
      r.report.scaled = get("scaled") == "true";
      r.report.scale_x = std::stod(get("scale_x"));
      r.report.scale_y = std::stod(get("scale_y"));
      r.report.tau = std::stod(get("tau"));
      r.report.decision = get("decision") == "true";
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::format, path.string() + ":" + std::to_string(line_no) + ": malformed number");
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline nlohmann::json aggregates_json(const CampaignResult& result, const CampaignConfig& config) {
  nlohmann::json units = nlohmann::json::array();
  for (const auto& a : aggregate(result, config.tau))
    units.push_back({{"unit", a.unit},
                     {"model", a.model},
                     {"resolution", {a.resolution.width, a.resolution.height}},
                     {"match_tests", a.match_tests},
                     {"true_positives", a.true_positives},
                     {"mismatch_tests", a.mismatch_tests},
                     {"false_positives", a.false_positives},
                     {"tpr", a.tpr},
                     {"fpr", a.fpr},
                     {"tpr_percent", percent_1dp(a.tpr)},
                     {"fpr_percent", percent_1dp(a.fpr)},
                     {"match_pce", to_json(a.match_pce)},
                     {"mismatch_pce", to_json(a.mismatch_pce)}});
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : result.failures) failures.push_back({{"unit", f.unit}, {"error", f.error}});
  return {{"tau", config.tau},
          {"config_digest", result.config_digest},
          {"nua_removal", {{"zero_mean", config.nua.zero_mean}, {"whitening", config.nua.whitening}}},
          {"units", units},
          {"failures", failures},
          {"log", result.log}};
}

inline void write_breakdown(const std::filesystem::path& csv_path, const std::filesystem::path& dat_path,
                            const std::vector<BreakdownRow>& rows) {
  std::ofstream csv(csv_path), dat(dat_path);
  if (!csv || !dat) throw Error(ErrorKind::io, "cannot write breakdown next to '" + csv_path.string() + "'");
  csv << csv_line({"image_user", "count", "min", "q1", "median", "q3", "max", "above_tau", "match_records",
                   "mismatch_records"});
  // gnuplot candlesticks: x box_min whisker_min whisker_max box_max, median as an extra column.
  dat << "# x image_user q1 min max q3 median count above_tau\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto& q = r.pce;
    csv << csv_line({r.image_user, std::to_string(q.count), format_real(q.min), format_real(q.q1),
                     format_real(q.median), format_real(q.q3), format_real(q.max), std::to_string(r.above_tau),
                     std::to_string(r.match_records), std::to_string(r.mismatch_records)});
    dat << i + 1 << ' ' << r.image_user << ' ' << format_real(q.q1) << ' ' << format_real(q.min) << ' '
        << format_real(q.max) << ' ' << format_real(q.q3) << ' ' << format_real(q.median) << ' ' << q.count << ' '
        << r.above_tau << "\n";
  }
}

// Writes records.csv, aggregates.json, anomalies.csv and per-fingerprint
// breakdowns; returns every path written.
inline std::vector<std::filesystem::path> write_campaign_outputs(const CampaignResult& result,
                                                                 const CampaignConfig& config,
                                                                 const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  write_records_csv(out_dir / "records.csv", result.records);
  written.push_back(out_dir / "records.csv");
  std::ofstream(out_dir / "aggregates.json") << aggregates_json(result, config).dump(2) << "\n";
  written.push_back(out_dir / "aggregates.json");
  {
    std::ofstream a(out_dir / "anomalies.csv");
    a << csv_line({"image_id", "fingerprint_user", "flag"});
    for (const auto& f : flag_metadata_anomalies(result, result.image_metadata, config.anomaly_patterns))
      a << csv_line({f.image_id, f.fingerprint_user, f.flag});
  }
  written.push_back(out_dir / "anomalies.csv");
  std::set<std::string> failed;
  for (const auto& f : result.failures) failed.insert(f.unit);
  for (const auto& unit : result.units) {
    if (failed.count(unit.name)) continue;
    const auto dir = out_dir / "units" / unit.name;
    std::filesystem::create_directories(dir);
    for (const auto& u : unit.users) {
      const auto csv = dir / ("breakdown_" + u.user_id + ".csv");
      const auto dat = dir / ("breakdown_" + u.user_id + ".dat");
      write_breakdown(csv, dat, inter_user_breakdown(result, unit.name, u.user_id, config.tau));
      written.push_back(csv);
      written.push_back(dat);
    }
  }
  return written;
}

}  // namespace prnulab
