#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "prnulab/campaign.hpp"
#include "prnulab/codec.hpp"
#include "prnulab/curation.hpp"
#include "prnulab/fingerprint.hpp"
#include "prnulab/matcher.hpp"
#include "prnulab/run_manifest.hpp"
#include "prnulab/source.hpp"
#include "prnulab/synthcam.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace prnulab;

namespace {

struct Common {
  std::size_t workers = default_workers();
  std::vector<std::string> argv;
};

void note(const std::string& msg) { std::cerr << "prnulab: " << msg << "\n"; }

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::config, path.string() + ": " + e.what());
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Environment override first, then the config value, then the shipped list.
fs::path blacklist_path(const std::string& from_config) {
  if (const char* env = std::getenv("PRNULAB_BLACKLIST"); env && *env) return env;
  if (!from_config.empty()) return from_config;
  return PRNULAB_DEFAULT_BLACKLIST;
}

bool is_image_file(const fs::path& p) {
  const auto ext = to_lower(p.extension().string());
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".tif" || ext == ".tiff";
}

std::vector<std::string> expand_refs(const std::vector<std::string>& refs) {
  std::vector<std::string> out;
  for (const auto& r : refs) {
    if (fs::is_directory(r)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(r))
        if (e.is_regular_file() && is_image_file(e.path())) found.push_back(e.path().string());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(r);
    }
  }
  return out;
}

// ---- fingerprint -----------------------------------------------------------

struct FingerprintArgs {
  std::vector<std::string> refs;
  std::string out;
  bool zero_mean = true;
  bool whitening = true;
};

int cmd_fingerprint(const FingerprintArgs& a, const Common& c) {
  auto paths = expand_refs(a.refs);
  std::vector<char> readable(paths.size(), 0);
  std::vector<std::string> why(paths.size());
  parallel_for(paths.size(), c.workers, [&](std::size_t i) {
    try {
      decode_image(paths[i]);
      readable[i] = 1;
    } catch (const Error& e) {
      why[i] = e.what();
    }
  });
  std::vector<std::string> ids;
  json skipped = json::array();
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (readable[i]) {
      ids.push_back(paths[i]);
    } else {
      note("skipping '" + paths[i] + "': " + why[i]);
      skipped.push_back({{"path", paths[i]}, {"error", why[i]}});
    }
  }
  if (ids.empty())
    throw Error(ErrorKind::empty_accumulator, "no readable reference images among " + std::to_string(paths.size()));
  const auto fp = build_fingerprint(ids, FileImageSource{}, DenoiserParams{}, {a.zero_mean, a.whitening}, c.workers);
  write_fingerprint(a.out, fp);
  std::cout << json{{"fingerprint", a.out},
                    {"count", fp.provenance.source_ids.size()},
                    {"dims", {fp.dims().width, fp.dims().height}},
                    {"cleaned", fp.cleaned},
                    {"provenance_digest", fp.provenance.digest()},
                    {"skipped", skipped},
                    {"tool_version", PRNULAB_VERSION}}
                   .dump()
            << "\n";
  return 0;
}

// ---- match -----------------------------------------------------------------

struct MatchArgs {
  std::string fingerprint;
  std::string image;
  double tau = 60.0;
  std::size_t radius = 5;
  bool two_sided = false;
  bool csv = false;
};

int cmd_match(const MatchArgs& a, const Common&) {
  const auto fp = read_fingerprint(a.fingerprint);
  const auto img = decode_image(a.image);
  MatcherParams params;
  params.tau = a.tau;
  params.neighborhood_radius = a.radius;
  params.two_sided_peak = a.two_sided;
  auto report = match_image(fp, img.plane, extract_residual(img.plane, fp.provenance.denoiser), params);
  report.image_id = a.image;
  report.fingerprint_id = fs::path(a.fingerprint).stem().string();
  if (a.csv) {
    std::cout << csv_line({PceReport::kCsvColumns.begin(), PceReport::kCsvColumns.end()})
              << csv_line(report.csv_fields());
  } else {
    std::cout << report.to_json().dump() << "\n";
  }
  return 0;
}

// ---- curate ----------------------------------------------------------------

struct CurateArgs {
  std::string config;
  std::string out;
};

int cmd_curate(const CurateArgs& a, const Common& c) {
  const auto cfg = read_json_file(a.config);
  const fs::path base = fs::path(a.config).parent_path();
  std::string configured;
  if (cfg.contains("blacklist")) configured = (base / cfg.at("blacklist").get<std::string>()).string();
  const auto bl_path = blacklist_path(configured);
  const auto blacklist = load_blacklist(bl_path);  // fails before any image is read

  std::vector<std::string> bad;
  std::size_t ref_min = 20, ref_max = 35;
  try {
    ref_min = cfg.value("reference_min", ref_min);
    ref_max = cfg.value("reference_max", ref_max);
  } catch (const json::exception& e) {
    bad.push_back(e.what());
  }
  if (!cfg.contains("units") || !cfg.at("units").is_array() || cfg.at("units").empty()) bad.push_back("units is empty");
  struct UnitJob {
    CurationRules rules;
    fs::path manifest;
  };
  std::vector<UnitJob> jobs;
  if (bad.empty()) {
    for (std::size_t i = 0; i < cfg.at("units").size(); ++i) {
      const auto& u = cfg.at("units").at(i);
      const std::string where = "units[" + std::to_string(i) + "]: ";
      UnitJob job;
      job.rules.software_blacklist = blacklist;
      job.rules.reference_min = ref_min;
      job.rules.reference_max = ref_max;
      job.rules.expected_make = u.value("make", std::string{});
      job.rules.expected_model = u.value("model", std::string{});
      if (u.contains("resolution") && u.at("resolution").is_array() && u.at("resolution").size() == 2)
        job.rules.max_resolution = {u.at("resolution").at(0).get<std::size_t>(),
                                    u.at("resolution").at(1).get<std::size_t>()};
      if (!u.contains("manifest")) bad.push_back(where + "manifest is missing");
      else job.manifest = base / u.at("manifest").get<std::string>();
      try {
        job.rules.validate();
      } catch (const Error& e) {
        bad.push_back(where + e.what());
      }
      jobs.push_back(std::move(job));
    }
  }
  if (!bad.empty()) {
    std::string msg = "curate config:";
    for (const auto& b : bad) msg += " " + b + ";";
    throw Error(ErrorKind::config, msg);
  }

  RunManifest manifest;
  manifest.command = "curate";
  manifest.arguments = c.argv;
  manifest.config_digest = sha256_hex(read_text(a.config));
  manifest.settings = {{"blacklist", bl_path.string()}, {"reference_min", ref_min}, {"reference_max", ref_max}};

  const fs::path out = a.out.empty() ? base / "curated" : fs::path(a.out);
  fs::create_directories(out);
  json summary = json::array();
  for (const auto& job : jobs) {
    const auto rows = read_manifest(job.manifest);
    const fs::path root = fs::absolute(job.manifest).parent_path();
    auto unit = curate_unit(rows, job.rules, FileImageSource(root), c.workers);
    unit.image_root = root.lexically_normal().string();
    const auto path = out / (unit.name + ".json");
    std::ofstream(path) << unit.to_json().dump(2) << "\n";
    manifest.outputs.push_back(path.string());
    for (const auto& line : unit.log) note(line);
    json failed = json::array();
    for (const auto& [user, reason] : unit.failed_users) failed.push_back({{"user_id", user}, {"reason", reason}});
    summary.push_back({{"unit", unit.name}, {"curated", path.string()}, {"users", unit.users.size()},
                       {"failed_users", failed}});
  }
  manifest.write(out / "manifest.json");
  std::cout << json{{"units", summary}, {"manifest", (out / "manifest.json").string()}}.dump() << "\n";
  return 0;
}

// ---- campaign --------------------------------------------------------------

struct CampaignArgs {
  std::string config;
  std::string out;
  std::optional<double> tau;
  std::optional<std::uint64_t> seed;
};

int cmd_campaign(const CampaignArgs& a, const Common& c) {
  const auto j = read_json_file(a.config);
  std::vector<std::string> defaulted;
  auto cfg = CampaignConfig::from_json(j, fs::path(a.config).parent_path(), &defaulted);
  if (a.tau) {
    cfg.tau = *a.tau;
    std::erase(defaulted, "tau");
  }
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  for (const auto& d : defaulted) note("config field '" + d + "' not set; using the default");

  std::map<std::string, std::unique_ptr<FileImageSource>> sources;
  for (const auto& u : cfg.units) sources[u.name] = std::make_unique<FileImageSource>(u.image_root);
  const auto result = run_campaign(
      cfg, [&](const CampaignUnit& u) -> const ImageSource& { return *sources.at(u.name); }, c.workers);
  for (const auto& line : result.log) note(line);

  const fs::path out = a.out.empty() ? fs::path(a.config).parent_path() / "campaign_out" : fs::path(a.out);
  RunManifest manifest;
  manifest.command = "campaign";
  manifest.arguments = c.argv;
  manifest.config_digest = result.config_digest;
  manifest.seed = cfg.seed;
  manifest.defaulted = defaulted;
  manifest.settings = cfg.to_json();
  manifest.settings.erase("units");
  for (const auto& p : write_campaign_outputs(result, cfg, out)) manifest.outputs.push_back(p.string());
  manifest.write(out / "manifest.json");

  json table = json::array();
  if (!result.records.empty())
    for (const auto& r : fpr_table(result, cfg.tau))
      table.push_back({{"unit", r.unit},
                       {"model", r.model},
                       {"resolution", {r.resolution.width, r.resolution.height}},
                       {"fpr_percent", r.fpr_percent},
                       {"tpr_percent", r.tpr_percent},
                       {"false_positives", r.false_positives},
                       {"mismatch_tests", r.mismatch_tests},
                       {"true_positives", r.true_positives},
                       {"match_tests", r.match_tests}});
  json failures = json::array();
  for (const auto& f : result.failures) {
    note("unit '" + f.unit + "' failed: " + f.error);
    failures.push_back({{"unit", f.unit}, {"error", f.error}});
  }
  std::cout << json{{"tau", cfg.tau}, {"table", table}, {"failures", failures},
                    {"manifest", (out / "manifest.json").string()}}
                   .dump()
            << "\n";
  return result.failures.empty() ? 0 : 1;
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t users = 2;
  std::size_t reference_images = 30;
  std::size_t test_images = 10;
  std::size_t size = 512;
};

int cmd_simulate(const SimulateArgs& a, const Common& c) {
  synth::ScenarioSpec spec = a.config.empty()
                                 ? synth::independent_users(a.users, a.reference_images, a.test_images,
                                                            {a.size, a.size}, a.seed.value_or(0))
                                 : synth::ScenarioSpec::from_json(read_json_file(a.config));
  if (a.seed) spec.seed = *a.seed;
  spec.validate();
  const auto bl = blacklist_path("");
  load_blacklist(bl);
  const auto files = synth::write_scenario(spec, a.out, fs::absolute(bl), c.workers);

  RunManifest manifest;
  manifest.command = "simulate";
  manifest.arguments = c.argv;
  manifest.config_digest = sha256_hex(spec.to_json().dump());
  manifest.seed = spec.seed;
  manifest.settings = spec.to_json();
  for (const auto& p : {files.manifest, files.ground_truth, files.curate_config, files.campaign_config})
    manifest.outputs.push_back(p.string());
  manifest.write(files.root / "run_manifest.json");
  std::cout << json{{"root", files.root.string()},
                    {"images", files.images.size()},
                    {"manifest", files.manifest.string()},
                    {"ground_truth", files.ground_truth.string()},
                    {"curate_config", files.curate_config.string()},
                    {"campaign_config", files.campaign_config.string()}}
                   .dump()
            << "\n";
  return 0;
}

// ---- breakdown -------------------------------------------------------------

struct BreakdownArgs {
  std::string records;
  std::string unit;
  std::string user;
  double tau = 60.0;
  bool csv = false;
};

int cmd_breakdown(const BreakdownArgs& a, const Common&) {
  CampaignResult result;
  result.records = read_records_csv(a.records);
  std::map<std::string, std::set<std::string>> users;
  for (const auto& r : result.records) {
    users[r.unit].insert(r.fingerprint_user);
    users[r.unit].insert(r.image_user);
  }
  for (const auto& [name, ids] : users) {
    CampaignUnit u;
    u.name = name;
    for (const auto& id : ids) u.users.push_back({id, {}, {}, {}});
    result.units.push_back(std::move(u));
  }
  const auto rows = inter_user_breakdown(result, a.unit, a.user, a.tau);
  if (a.csv) {
    std::cout << csv_line({"image_user", "count", "min", "q1", "median", "q3", "max", "above_tau", "match_records",
                           "mismatch_records"});
    for (const auto& r : rows)
      std::cout << csv_line({r.image_user, std::to_string(r.pce.count), format_real(r.pce.min),
                             format_real(r.pce.q1), format_real(r.pce.median), format_real(r.pce.q3),
                             format_real(r.pce.max), std::to_string(r.above_tau), std::to_string(r.match_records),
                             std::to_string(r.mismatch_records)});
  } else {
    json groups = json::array();
    for (const auto& r : rows) {
      auto g = to_json(r.pce);
      g["image_user"] = r.image_user;
      g["above_tau"] = r.above_tau;
      g["match_records"] = r.match_records;
      g["mismatch_records"] = r.mismatch_records;
      groups.push_back(g);
    }
    std::cout << json{{"unit", a.unit}, {"reference_user", a.user}, {"tau", a.tau}, {"groups", groups}}.dump()
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PRNU camera source identification toolkit"};
  app.set_version_flag("--version", PRNULAB_VERSION);
  app.require_subcommand(1);
  Common common;
  for (int i = 0; i < argc; ++i) common.argv.emplace_back(argv[i]);
  app.add_option("--workers", common.workers, "Worker threads")->check(CLI::PositiveNumber);

  FingerprintArgs fa;
  auto* fp = app.add_subcommand("fingerprint", "Estimate a camera fingerprint from reference images");
  fp->add_option("--refs", fa.refs, "Reference images or directories")->required();
  fp->add_option("--out", fa.out, "Output fingerprint file")->required();
  fp->add_flag("--zero-mean,!--no-zero-mean", fa.zero_mean, "Row/column zero-mean pass");
  fp->add_flag("--whitening,!--no-whitening", fa.whitening, "Spectral whitening pass");
  fp->add_option("--workers", common.workers)->check(CLI::PositiveNumber);

  MatchArgs ma;
  auto* mt = app.add_subcommand("match", "Correlate one image against a fingerprint");
  mt->add_option("--fingerprint", ma.fingerprint, "Fingerprint file")->required();
  mt->add_option("--image", ma.image, "Test image")->required();
  mt->add_option("--tau", ma.tau, "Decision threshold");
  mt->add_option("--radius", ma.radius, "Peak neighbourhood radius");
  mt->add_flag("--two-sided", ma.two_sided, "Select the peak by absolute correlation");
  auto* mj = mt->add_flag("--json", "JSON output (default)");
  mt->add_flag("--csv", ma.csv, "CSV output")->excludes(mj);
  mt->add_option("--workers", common.workers)->check(CLI::PositiveNumber);

  CurateArgs ca;
  auto* cu = app.add_subcommand("curate", "Filter and split images per curation rules");
  cu->add_option("--config", ca.config, "Curation config JSON")->required();
  cu->add_option("--out", ca.out, "Output directory for curated units");
  cu->add_option("--workers", common.workers)->check(CLI::PositiveNumber);

  CampaignArgs ga;
  auto* cp = app.add_subcommand("campaign", "Run match/mismatch tests over curated units");
  cp->add_option("--config", ga.config, "Campaign config JSON")->required();
  cp->add_option("--out", ga.out, "Output directory");
  cp->add_option("--tau", ga.tau, "Override the decision threshold");
  cp->add_option("--seed", ga.seed, "Override the sampling seed");
  cp->add_option("--workers", common.workers)->check(CLI::PositiveNumber);

  SimulateArgs sa;
  auto* sm = app.add_subcommand("simulate", "Write a synthetic scenario dataset");
  sm->add_option("--config", sa.config, "Scenario spec JSON");
  sm->add_option("--out", sa.out, "Output directory")->required();
  sm->add_option("--seed", sa.seed, "Scenario seed");
  sm->add_option("--users", sa.users, "Users (without --config)");
  sm->add_option("--reference-images", sa.reference_images, "Reference images per user (without --config)");
  sm->add_option("--test-images", sa.test_images, "Test images per user (without --config)");
  sm->add_option("--size", sa.size, "Square image side (without --config)");
  sm->add_option("--workers", common.workers)->check(CLI::PositiveNumber);

  BreakdownArgs ba;
  auto* bd = app.add_subcommand("breakdown", "Per-user PCE quantiles for one fingerprint");
  bd->add_option("--records", ba.records, "records.csv from a campaign")->required();
  bd->add_option("--unit", ba.unit, "Unit name")->required();
  bd->add_option("--user", ba.user, "Fingerprint owner")->required();
  bd->add_option("--tau", ba.tau, "Threshold for above-tau counts");
  auto* bj = bd->add_flag("--json", "JSON output (default)");
  bd->add_flag("--csv", ba.csv, "CSV output")->excludes(bj);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fp) return cmd_fingerprint(fa, common);
    if (*mt) return cmd_match(ma, common);
    if (*cu) return cmd_curate(ca, common);
    if (*cp) return cmd_campaign(ga, common);
    if (*sm) return cmd_simulate(sa, common);
    if (*bd) return cmd_breakdown(ba, common);
  } catch (const Error& e) {
    note(e.what());
    return 1;
  } catch (const std::exception& e) {
    note(std::string("internal-error: ") + e.what());
    return 1;
  }
  return 2;
}
