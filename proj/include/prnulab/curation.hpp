#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "prnulab/raster.hpp"
#include "prnulab/source.hpp"
#include "prnulab/util.hpp"

namespace prnulab {

enum class RejectReason {
  missing_make_model,
  model_mismatch,
  wrong_resolution,
  software_blacklisted,
  focal_length_mismatch,
  focal_length_absent,
  unreadable,
};

inline const char* to_string(RejectReason r) {
  switch (r) {
    case RejectReason::missing_make_model: return "missing-make-model";
    case RejectReason::model_mismatch: return "model-mismatch";
    case RejectReason::wrong_resolution: return "wrong-resolution";
    case RejectReason::software_blacklisted: return "software-blacklisted";
    case RejectReason::focal_length_mismatch: return "focal-length-mismatch";
    case RejectReason::focal_length_absent: return "focal-length-absent";
    case RejectReason::unreadable: return "unreadable";
  }
  return "unknown";
}

struct CurationRules {
  std::string expected_make;
  std::string expected_model;
  Dims max_resolution;
  std::vector<std::string> software_blacklist;
  std::size_t reference_min = 20;
  std::size_t reference_max = 35;
  bool software_filtering = true;

  void validate() const {
    std::vector<std::string> bad;
    if (trim(expected_model).empty()) bad.emplace_back("expected_model is empty");
    if (trim(expected_make).empty()) bad.emplace_back("expected_make is empty");
    if (max_resolution.area() == 0) bad.emplace_back("max_resolution must be positive");
    if (reference_min > reference_max) bad.emplace_back("reference_min exceeds reference_max");
    if (reference_min == 0) bad.emplace_back("reference_min must be >= 1");
    if (software_filtering && software_blacklist.empty()) bad.emplace_back("software_blacklist is empty");
    if (bad.empty()) return;
    std::string msg = "curation rules:";
    for (const auto& b : bad) msg += " " + b + ";";
    throw Error(ErrorKind::config, msg);
  }
};

struct ImageEntry {
  std::string id;
  ExifRecord exif;
};

struct Discarded {
  std::string id;
  std::string reason;
  friend bool operator==(const Discarded&, const Discarded&) = default;
};

struct UserImageSet {
  std::string user_id;
  std::vector<std::string> reference;
  std::vector<std::string> test;
  std::vector<Discarded> discarded;

  nlohmann::json to_json() const {
    nlohmann::json d = nlohmann::json::array();
    for (const auto& x : discarded) d.push_back({{"id", x.id}, {"reason", x.reason}});
    return {{"user_id", user_id}, {"reference", reference}, {"test", test}, {"discarded", d}};
  }

  static UserImageSet from_json(const nlohmann::json& j) {
    UserImageSet u;
    u.user_id = j.at("user_id").get<std::string>();
    u.reference = j.at("reference").get<std::vector<std::string>>();
    u.test = j.value("test", std::vector<std::string>{});
    if (j.contains("discarded"))
      for (const auto& d : j.at("discarded")) u.discarded.push_back({d.at("id"), d.at("reason")});
    return u;
  }
};

namespace detail {
inline bool same_text(const std::string& a, const std::string& b) { return to_lower(trim(a)) == to_lower(trim(b)); }
}  // namespace detail

// Rules 1-3 on a single record; nullopt means accepted.
inline std::optional<RejectReason> filter_image(const ExifRecord& rec, const CurationRules& rules) {
  auto present = [](const std::optional<std::string>& s) { return s && !trim(*s).empty(); };
  if (!present(rec.make) || !present(rec.model)) return RejectReason::missing_make_model;
  if (!detail::same_text(*rec.make, rules.expected_make) || !detail::same_text(*rec.model, rules.expected_model))
    return RejectReason::model_mismatch;
  if (rec.pixel_dims != rules.max_resolution && rec.pixel_dims != rules.max_resolution.transposed())
    return RejectReason::wrong_resolution;
  if (rules.software_filtering && rec.software)
    for (const auto& pattern : rules.software_blacklist)
      if (icontains(*rec.software, pattern)) return RejectReason::software_blacklisted;
  return std::nullopt;
}

struct FocalModeResult {
  std::vector<ImageEntry> kept;
  std::vector<Discarded> dropped;
  std::optional<double> mode;
  std::vector<double> tied_values;  // every focal value sharing the top count, when more than one
};

// Keeps the images at the most frequent focal length. Ties resolve to the
// smallest focal value. Images without a focal length are kept only when no
// image has one.
inline FocalModeResult focal_mode_filter(const std::vector<ImageEntry>& images) {
  FocalModeResult out;
  std::map<double, std::size_t> counts;
  for (const auto& im : images)
    if (im.exif.focal_length) ++counts[round_focal_length(*im.exif.focal_length)];
  if (counts.empty()) {
    out.kept = images;
    return out;
  }
  std::size_t top = 0;
  for (const auto& [value, n] : counts) top = std::max(top, n);
  for (const auto& [value, n] : counts)
    if (n == top) {
      if (!out.mode) out.mode = value;
      out.tied_values.push_back(value);
    }
  if (out.tied_values.size() == 1) out.tied_values.clear();
  for (const auto& im : images) {
    if (!im.exif.focal_length)
      out.dropped.push_back({im.id, to_string(RejectReason::focal_length_absent)});
    else if (round_focal_length(*im.exif.focal_length) != *out.mode)
      out.dropped.push_back({im.id, to_string(RejectReason::focal_length_mismatch)});
    else
      out.kept.push_back(im);
  }
  return out;
}

inline bool zoom_eligible(const ExifRecord& rec) { return !rec.digital_zoom || *rec.digital_zoom == 1.0; }

// Reference = the first reference_max zoom-eligible images in id order;
// everything else is test.
inline UserImageSet split_reference_test(std::vector<ImageEntry> images, const CurationRules& rules,
                                         std::string user_id = {}) {
  std::sort(images.begin(), images.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  UserImageSet out;
  out.user_id = std::move(user_id);
  std::size_t eligible = 0;
  for (const auto& im : images) {
    if (zoom_eligible(im.exif)) {
      ++eligible;
      if (out.reference.size() < rules.reference_max) {
        out.reference.push_back(im.id);
        continue;
      }
    }
    out.test.push_back(im.id);
  }
  if (eligible < rules.reference_min)
    throw InsufficientReferenceError(out.user_id, rules.reference_min - eligible);
  return out;
}

struct UserCuration {
  UserImageSet set;
  std::vector<std::string> log;
};

// Full per-user pass: rules 1-3, the focal-length mode filter, the split.
// Throws InsufficientReferenceError when the split cannot be made.
inline UserCuration curate_user(const std::string& user_id, const std::vector<ImageEntry>& images,
                                const CurationRules& rules) {
  UserCuration out;
  std::vector<ImageEntry> passed;
  std::vector<Discarded> discarded;
  for (const auto& im : images) {
    if (auto reason = filter_image(im.exif, rules)) discarded.push_back({im.id, to_string(*reason)});
    else passed.push_back(im);
  }
  auto focal = focal_mode_filter(passed);
  if (!focal.tied_values.empty()) {
    std::string values;
    for (double v : focal.tied_values) values += (values.empty() ? "" : ", ") + format_real(v);
    out.log.push_back("user '" + user_id + "': focal-length mode tie between {" + values + "}, kept " +
                      format_real(*focal.mode));
  }
  discarded.insert(discarded.end(), focal.dropped.begin(), focal.dropped.end());
  out.set = split_reference_test(std::move(focal.kept), rules, user_id);
  std::sort(discarded.begin(), discarded.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  out.set.discarded = std::move(discarded);
  return out;
}

// ---- files -----------------------------------------------------------------

// One pattern per line; blank lines and lines starting with '#' are ignored.
inline std::vector<std::string> load_blacklist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read software blacklist '" + path.string() + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (!t.empty() && t.front() != '#') out.push_back(t);
  }
  if (out.empty()) throw Error(ErrorKind::config, "software blacklist '" + path.string() + "' has no patterns");
  return out;
}

struct ManifestRow {
  std::string user_id;
  std::string image_path;
};

// CSV with a header naming user_id and image_path. Fields are not quoted.
inline std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read manifest '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::format, "manifest '" + path.string() + "' is empty");
  auto split = [](const std::string& s) {
    std::vector<std::string> f;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(trim(cell));
    return f;
  };
  const auto header = split(line);
  const auto user_col = std::find(header.begin(), header.end(), "user_id") - header.begin();
  const auto path_col = std::find(header.begin(), header.end(), "image_path") - header.begin();
  if (static_cast<std::size_t>(user_col) == header.size() || static_cast<std::size_t>(path_col) == header.size())
    throw Error(ErrorKind::format, "manifest '" + path.string() + "' needs user_id and image_path columns");
  std::vector<ManifestRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto f = split(line);
    const auto need = static_cast<std::size_t>(std::max(user_col, path_col));
    if (f.size() <= need)
      throw Error(ErrorKind::format, path.string() + ":" + std::to_string(line_no) + ": missing fields");
    rows.push_back({f[static_cast<std::size_t>(user_col)], f[static_cast<std::size_t>(path_col)]});
  }
  return rows;
}

inline std::string unit_name(const std::string& model, Dims resolution) {
  std::string slug;
  for (char c : to_lower(trim(model))) slug += std::isalnum(static_cast<unsigned char>(c)) ? c : '-';
  return slug + "_" + std::to_string(resolution.width) + "x" + std::to_string(resolution.height);
}

// A curated (model, resolution) unit: the users that passed curation and
// the ones that did not.
struct CuratedUnit {
  std::string name;
  std::string make;
  std::string model;
  Dims resolution;
  std::string image_root;
  std::vector<UserImageSet> users;
  std::vector<std::pair<std::string, std::string>> failed_users;  // (user, reason)
  std::vector<std::string> log;

  nlohmann::json to_json() const {
    nlohmann::json u = nlohmann::json::array(), f = nlohmann::json::array();
    for (const auto& s : users) u.push_back(s.to_json());
    for (const auto& [user, why] : failed_users) f.push_back({{"user_id", user}, {"reason", why}});
    return {{"name", name},   {"make", make},   {"model", model}, {"resolution", {resolution.width, resolution.height}},
            {"image_root", image_root}, {"users", u}, {"failed_users", f}, {"log", log}};
  }

  static CuratedUnit from_json(const nlohmann::json& j) {
    CuratedUnit c;
    c.model = j.at("model").get<std::string>();
    c.make = j.value("make", std::string{});
    const auto res = j.at("resolution");
    c.resolution = {res.at(0).get<std::size_t>(), res.at(1).get<std::size_t>()};
    c.name = j.value("name", unit_name(c.model, c.resolution));
    c.image_root = j.value("image_root", std::string{});
    for (const auto& u : j.at("users")) c.users.push_back(UserImageSet::from_json(u));
    return c;
  }
};

// Reads every image's metadata, groups by user and curates each user.
// Images that fail to decode are discarded as unreadable.
inline CuratedUnit curate_unit(const std::vector<ManifestRow>& rows, const CurationRules& rules,
                               const ImageSource& source, std::size_t workers = 1) {
  rules.validate();
  CuratedUnit unit;
  unit.make = rules.expected_make;
  unit.model = rules.expected_model;
  unit.resolution = rules.max_resolution;
  unit.name = unit_name(rules.expected_model, rules.max_resolution);

  std::vector<std::optional<ExifRecord>> records(rows.size());
  std::vector<std::string> errors(rows.size());
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    try {
      records[i] = source.load(rows[i].image_path).exif;
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  std::map<std::string, std::vector<ImageEntry>> by_user;
  std::map<std::string, std::vector<Discarded>> unreadable;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (records[i]) {
      by_user[rows[i].user_id].push_back({rows[i].image_path, *records[i]});
    } else {
      by_user[rows[i].user_id];
      unreadable[rows[i].user_id].push_back({rows[i].image_path, to_string(RejectReason::unreadable)});
      unit.log.push_back("unreadable image '" + rows[i].image_path + "': " + errors[i]);
    }
  }
  for (auto& [user, images] : by_user) {
    try {
      auto cur = curate_user(user, images, rules);
      auto& d = cur.set.discarded;
      d.insert(d.end(), unreadable[user].begin(), unreadable[user].end());
      std::sort(d.begin(), d.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
      unit.log.insert(unit.log.end(), cur.log.begin(), cur.log.end());
      unit.users.push_back(std::move(cur.set));
    } catch (const InsufficientReferenceError& e) {
      unit.failed_users.emplace_back(user, e.what());
      unit.log.push_back(std::string("user '") + user + "' dropped: " + e.what());
    }
  }
  return unit;
}

}  // namespace prnulab
