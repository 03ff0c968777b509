#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "prnulab/codec.hpp"
#include "prnulab/curation.hpp"
#include "prnulab/source.hpp"
#include "prnulab/util.hpp"

namespace prnulab::synth {

enum class Kernel { nearest, bilinear, bicubic };

inline const char* to_string(Kernel k) {
  switch (k) {
    case Kernel::nearest: return "nearest";
    case Kernel::bilinear: return "bilinear";
    case Kernel::bicubic: return "bicubic";
  }
  return "unknown";
}

inline Kernel kernel_from_string(const std::string& s) {
  for (auto k : {Kernel::nearest, Kernel::bilinear, Kernel::bicubic})
    if (s == to_string(k)) return k;
  throw Error(ErrorKind::config, "unknown interpolation kernel '" + s + "'");
}

// In-camera processing shared between devices.
struct NuaProfile {
  std::size_t binning = 1;
  Kernel kernel = Kernel::bilinear;
  std::optional<int> jpeg_quality = 95;  // nullopt: lossless
  std::optional<std::string> shared_pattern_id;
  double shared_pattern_amplitude = 0.0;

  std::vector<std::string> problems(Dims dims) const {
    std::vector<std::string> out;
    if (binning != 1 && binning != 2) out.push_back("binning must be 1 or 2");
    else if (dims.width % binning != 0 || dims.height % binning != 0)
      out.push_back("binning factor must divide both dimensions");
    if (jpeg_quality && (*jpeg_quality < 1 || *jpeg_quality > 100)) out.push_back("jpeg_quality must be in 1..100");
    if (!(shared_pattern_amplitude >= 0.0)) out.push_back("shared_pattern_amplitude must be >= 0");
    return out;
  }

  nlohmann::json to_json() const {
    return {{"binning", binning},
            {"kernel", to_string(kernel)},
            {"jpeg_quality", jpeg_quality ? nlohmann::json(*jpeg_quality) : nlohmann::json("lossless")},
            {"shared_pattern_id", shared_pattern_id ? nlohmann::json(*shared_pattern_id) : nlohmann::json(nullptr)},
            {"shared_pattern_amplitude", shared_pattern_amplitude}};
  }

  static NuaProfile from_json(const nlohmann::json& j) { return from_json(j, NuaProfile{}); }

  static NuaProfile from_json(const nlohmann::json& j, NuaProfile base) {
    if (j.contains("binning")) base.binning = j.at("binning").get<std::size_t>();
    if (j.contains("kernel")) base.kernel = kernel_from_string(j.at("kernel").get<std::string>());
    if (j.contains("jpeg_quality")) {
      const auto& q = j.at("jpeg_quality");
      if (q.is_string() && q.get<std::string>() == "lossless") base.jpeg_quality.reset();
      else base.jpeg_quality = q.get<int>();
    }
    if (j.contains("shared_pattern_id")) {
      const auto& t = j.at("shared_pattern_id");
      if (t.is_null()) base.shared_pattern_id.reset();
      else base.shared_pattern_id = t.get<std::string>();
    }
    if (j.contains("shared_pattern_amplitude"))
      base.shared_pattern_amplitude = j.at("shared_pattern_amplitude").get<double>();
    return base;
  }
};

struct SynthCamera {
  std::string camera_id;
  Dims dims;
  Matrix k_true;  // zero mean, unit standard deviation
  double strength = 0.0;
  NuaProfile nua;
  std::uint64_t seed = 0;
  Matrix shared_pattern;  // empty when the profile has no pattern
};

namespace detail {

inline Matrix gaussian_field(Dims d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(d);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

inline void standardize(Matrix& m) {
  const double mu = mean(m);
  double ss = 0.0;
  for (double& v : m.data()) {
    v -= mu;
    ss += v * v;
  }
  const double sd = std::sqrt(ss / static_cast<double>(m.size()));
  if (sd > 0.0)
    for (double& v : m.data()) v /= sd;
}

// Separable Gaussian blur with replicated borders.
inline Matrix gaussian_blur(const Matrix& m, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;
  const auto w = static_cast<int>(m.width()), h = static_cast<int>(m.height());
  Matrix tmp(m.dims()), out(m.dims());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i)
        s += k[static_cast<std::size_t>(i + radius)] *
             m(static_cast<std::size_t>(r), static_cast<std::size_t>(std::clamp(c + i, 0, w - 1)));
      tmp(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = s;
    }
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i)
        s += k[static_cast<std::size_t>(i + radius)] *
             tmp(static_cast<std::size_t>(std::clamp(r + i, 0, h - 1)), static_cast<std::size_t>(c));
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = s;
    }
  return out;
}

inline Matrix bin_average(const Matrix& m, std::size_t f) {
  Matrix out(m.width() / f, m.height() / f);
  const double inv = 1.0 / static_cast<double>(f * f);
  for (std::size_t r = 0; r < out.height(); ++r)
    for (std::size_t c = 0; c < out.width(); ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < f; ++i)
        for (std::size_t j = 0; j < f; ++j) s += m(r * f + i, c * f + j);
      out(r, c) = s * inv;
    }
  return out;
}

inline Matrix resize_bilinear(const Matrix& m, Dims target) {
  auto taps = [](std::size_t src, std::size_t dst) {
    std::vector<std::pair<std::size_t, double>> t(dst);  // (left index, right weight)
    const double scale = static_cast<double>(src) / static_cast<double>(dst);
    for (std::size_t i = 0; i < dst; ++i) {
      const double x = std::clamp((static_cast<double>(i) + 0.5) * scale - 0.5, 0.0, static_cast<double>(src - 1));
      const auto left = std::min(static_cast<std::size_t>(x), src - 1);
      t[i] = {left, x - static_cast<double>(left)};
    }
    return t;
  };
  const auto tc = taps(m.width(), target.width), tr = taps(m.height(), target.height);
  Matrix out(target);
  for (std::size_t r = 0; r < target.height; ++r) {
    const auto [r0, wr] = tr[r];
    const std::size_t r1 = std::min(r0 + 1, m.height() - 1);
    for (std::size_t c = 0; c < target.width; ++c) {
      const auto [c0, wc] = tc[c];
      const std::size_t c1 = std::min(c0 + 1, m.width() - 1);
      out(r, c) = (1 - wr) * ((1 - wc) * m(r0, c0) + wc * m(r0, c1)) + wr * ((1 - wc) * m(r1, c0) + wc * m(r1, c1));
    }
  }
  return out;
}

inline Matrix upsample(const Matrix& m, Dims target, Kernel kernel) {
  switch (kernel) {
    case Kernel::nearest: {
      Matrix out(target);
      const std::size_t fx = target.width / m.width(), fy = target.height / m.height();
      for (std::size_t r = 0; r < target.height; ++r)
        for (std::size_t c = 0; c < target.width; ++c) out(r, c) = m(r / fy, c / fx);
      return out;
    }
    case Kernel::bilinear: return resize_bilinear(m, target);
    case Kernel::bicubic: return resize_bicubic(m, target);
  }
  return m;
}

}  // namespace detail

// Band-limited pattern shared by every camera carrying the same token:
// Gaussian noise seeded from the token, blurred (sigma 1 px), unit std.
inline Matrix shared_pattern(const std::string& token, Dims dims, double amplitude) {
  Matrix p = detail::gaussian_blur(detail::gaussian_field(dims, derive_seed(fnv1a(token), "shared-pattern")), 1.0);
  detail::standardize(p);
  for (double& v : p.data()) v *= amplitude;
  return p;
}

inline SynthCamera make_camera(std::uint64_t seed, Dims dims, double strength, NuaProfile nua = {},
                               std::string camera_id = {}) {
  if (dims.width < ImagePlane::kMinSide || dims.height < ImagePlane::kMinSide)
    throw Error(ErrorKind::size, "camera " + to_string(dims) + " is below the 64x64 minimum");
  std::vector<std::string> bad = nua.problems(dims);
  if (!(strength >= 0.0)) bad.emplace_back("strength must be >= 0");
  if (!bad.empty()) {
    std::string msg = "camera '" + camera_id + "':";
    for (const auto& b : bad) msg += " " + b + ";";
    throw Error(ErrorKind::config, msg);
  }
  SynthCamera cam;
  cam.camera_id = camera_id.empty() ? "cam-" + std::to_string(seed) : std::move(camera_id);
  cam.dims = dims;
  cam.k_true = detail::gaussian_field(dims, derive_seed(seed, "prnu"));
  detail::standardize(cam.k_true);
  cam.strength = strength;
  cam.nua = nua;
  cam.seed = seed;
  if (nua.shared_pattern_id && nua.shared_pattern_amplitude > 0.0)
    cam.shared_pattern = shared_pattern(*nua.shared_pattern_id, dims, nua.shared_pattern_amplitude);
  return cam;
}

// Sensor output and in-camera processing up to, not including, the JPEG
// stage: scene (1 + s K) + read noise, binning, shared pattern, clamp.
inline Matrix expose(const SynthCamera& cam, const ImagePlane& scene, double read_noise_std,
                     std::uint64_t shot_index = 0) {
  if (scene.dims() != cam.dims)
    throw Error(ErrorKind::shape, "scene " + to_string(scene.dims()) + " does not match camera " + to_string(cam.dims));
  Matrix raw(cam.dims);
  const auto& s = scene.samples();
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = s[i] * (1.0 + cam.strength * cam.k_true[i]);
  if (read_noise_std > 0.0) {
    Rng rng(derive_seed(cam.seed, "shot", shot_index));
    for (double& v : raw.data()) v += read_noise_std * rng.normal();
  }
  if (cam.nua.binning > 1)
    raw = detail::upsample(detail::bin_average(raw, cam.nua.binning), cam.dims, cam.nua.kernel);
  if (!cam.shared_pattern.empty())
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] += cam.shared_pattern[i];
  for (double& v : raw.data()) v = std::clamp(v, 0.0, ImagePlane::kMaxValue);
  return raw;
}

inline ImagePlane shoot(const SynthCamera& cam, const ImagePlane& scene, double read_noise_std,
                        std::uint64_t shot_index = 0) {
  Matrix out = expose(cam, scene, read_noise_std, shot_index);
  if (cam.nua.jpeg_quality) out = jpeg_round_trip(out, *cam.nua.jpeg_quality);
  return ImagePlane::clamped(std::move(out));
}

// ---- scenes ----------------------------------------------------------------

enum class SceneKind { flat, gradient, texture };

inline const char* to_string(SceneKind k) {
  switch (k) {
    case SceneKind::flat: return "flat";
    case SceneKind::gradient: return "gradient";
    case SceneKind::texture: return "texture";
  }
  return "unknown";
}

inline SceneKind scene_from_string(const std::string& s) {
  for (auto k : {SceneKind::flat, SceneKind::gradient, SceneKind::texture})
    if (s == to_string(k)) return k;
  throw Error(ErrorKind::config, "unknown scene kind '" + s + "'");
}

inline ImagePlane flat_scene(Dims d, double level = 128.0) { return ImagePlane(Matrix(d, level)); }

// Linear ramp through mid-grey in a seeded direction, spanning about 60..196.
inline ImagePlane gradient_scene(Dims d, std::uint64_t seed) {
  Rng rng(seed);
  const double theta = 2.0 * std::numbers::pi * rng.uniform();
  const double cx = std::cos(theta), cy = std::sin(theta);
  Matrix m(d);
  const double hw = 0.5 * static_cast<double>(d.width), hh = 0.5 * static_cast<double>(d.height);
  const double reach = std::abs(cx) * hw + std::abs(cy) * hh;
  for (std::size_t r = 0; r < d.height; ++r)
    for (std::size_t c = 0; c < d.width; ++c) {
      const double t = (cx * (static_cast<double>(c) + 0.5 - hw) + cy * (static_cast<double>(r) + 0.5 - hh)) / reach;
      m(r, c) = 128.0 + 68.0 * t;
    }
  return ImagePlane::clamped(std::move(m));
}

// Multi-octave smoothed noise with a roughly 1/f amplitude spectrum,
// mean 128, clamped to [16, 240].
inline ImagePlane texture_scene(Dims d, std::uint64_t seed) {
  Matrix acc(d);
  for (std::size_t scale : {64u, 32u, 16u, 8u, 4u, 2u}) {
    const Dims coarse{std::max<std::size_t>(2, d.width / scale), std::max<std::size_t>(2, d.height / scale)};
    auto layer = resize_bicubic(detail::gaussian_field(coarse, derive_seed(seed, "octave", scale)), d);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += static_cast<double>(scale) * layer[i];
  }
  detail::standardize(acc);
  for (double& v : acc.data()) v = std::clamp(128.0 + 40.0 * v, 16.0, 240.0);
  return ImagePlane(std::move(acc));
}

inline ImagePlane make_scene(SceneKind kind, Dims d, std::uint64_t seed) {
  switch (kind) {
    case SceneKind::flat: return flat_scene(d, 128.0);
    case SceneKind::gradient: return gradient_scene(d, seed);
    case SceneKind::texture: return texture_scene(d, seed);
  }
  return flat_scene(d);
}

// ---- scenarios -------------------------------------------------------------

struct ScenarioUser {
  std::string user_id;
  std::string camera_id;
  std::size_t reference_images = 30;
  std::size_t test_images = 10;
  std::optional<NuaProfile> nua;  // overrides the scenario default
};

struct ScenarioSpec {
  std::uint64_t seed = 0;
  Dims dims{512, 512};
  double strength = 0.05;
  double read_noise_std = 2.0;
  SceneKind scene = SceneKind::texture;
  NuaProfile nua;
  std::string make = "Synthetic";
  std::string model = "SynthCam One";
  std::string software = "SynthCam firmware 1.0";
  double focal_length = 4.15;
  double test_digital_zoom = 2.0;
  // Custom Rendered tag written on images from cameras carrying a shared pattern.
  std::string shared_pattern_tag = "Portrait HDR";
  std::vector<ScenarioUser> users;

  NuaProfile profile_for(const ScenarioUser& u) const { return u.nua.value_or(nua); }

  void validate() const {
    std::vector<std::string> bad;
    if (dims.width < ImagePlane::kMinSide || dims.height < ImagePlane::kMinSide) bad.push_back("dims below 64x64");
    if (!(strength >= 0.0)) bad.push_back("strength must be >= 0");
    if (!(read_noise_std >= 0.0)) bad.push_back("read_noise_std must be >= 0");
    if (users.empty()) bad.push_back("users is empty");
    std::map<std::string, int> ids;
    std::map<std::string, nlohmann::json> camera_profiles;
    for (const auto& u : users) {
      const std::string where = "user '" + u.user_id + "': ";
      if (u.user_id.empty() || u.user_id.find_first_of("/\\,") != std::string::npos)
        bad.push_back(where + "user_id must be non-empty without '/', '\\' or ','");
      if (++ids[u.user_id] == 2) bad.push_back(where + "duplicate user_id");
      if (u.camera_id.empty()) bad.push_back(where + "camera_id is empty");
      if (u.reference_images + u.test_images == 0) bad.push_back(where + "no images");
      const auto profile = profile_for(u);
      for (const auto& p : profile.problems(dims)) bad.push_back(where + p);
      auto [it, fresh] = camera_profiles.emplace(u.camera_id, profile.to_json());
      if (!fresh && it->second != profile.to_json())
        bad.push_back(where + "camera '" + u.camera_id + "' is used with two different NUA profiles");
    }
    if (bad.empty()) return;
    std::string msg = "scenario spec:";
    for (const auto& b : bad) msg += " " + b + ";";
    throw Error(ErrorKind::config, msg);
  }

  nlohmann::json to_json() const {
    nlohmann::json us = nlohmann::json::array();
    for (const auto& u : users) {
      nlohmann::json j = {{"user_id", u.user_id},
                          {"camera_id", u.camera_id},
                          {"reference_images", u.reference_images},
                          {"test_images", u.test_images}};
      if (u.nua) j["nua"] = u.nua->to_json();
      us.push_back(j);
    }
    return {{"seed", seed},
            {"dims", {dims.width, dims.height}},
            {"strength", strength},
            {"read_noise_std", read_noise_std},
            {"scene", to_string(scene)},
            {"nua", nua.to_json()},
            {"make", make},
            {"model", model},
            {"software", software},
            {"focal_length", focal_length},
            {"test_digital_zoom", test_digital_zoom},
            {"shared_pattern_tag", shared_pattern_tag},
            {"users", us}};
  }

  static ScenarioSpec from_json(const nlohmann::json& j) {
    ScenarioSpec s;
    try {
      s.seed = j.value("seed", s.seed);
      if (j.contains("dims")) s.dims = {j.at("dims").at(0).get<std::size_t>(), j.at("dims").at(1).get<std::size_t>()};
      s.strength = j.value("strength", s.strength);
      s.read_noise_std = j.value("read_noise_std", s.read_noise_std);
      if (j.contains("scene")) s.scene = scene_from_string(j.at("scene").get<std::string>());
      if (j.contains("nua")) s.nua = NuaProfile::from_json(j.at("nua"));
      s.make = j.value("make", s.make);
      s.model = j.value("model", s.model);
      s.software = j.value("software", s.software);
      s.focal_length = j.value("focal_length", s.focal_length);
      s.test_digital_zoom = j.value("test_digital_zoom", s.test_digital_zoom);
      s.shared_pattern_tag = j.value("shared_pattern_tag", s.shared_pattern_tag);
      for (const auto& u : j.at("users")) {
        ScenarioUser su;
        su.user_id = u.at("user_id").get<std::string>();
        su.camera_id = u.value("camera_id", su.user_id);
        su.reference_images = u.value("reference_images", su.reference_images);
        su.test_images = u.value("test_images", su.test_images);
        if (u.contains("nua")) su.nua = NuaProfile::from_json(u.at("nua"), s.nua);
        s.users.push_back(std::move(su));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::config, std::string("scenario spec: ") + e.what());
    }
    return s;
  }
};

// Ready-made scenario: `n_users` users with independent cameras.
inline ScenarioSpec independent_users(std::size_t n_users, std::size_t reference_images, std::size_t test_images,
                                      Dims dims = {512, 512}, std::uint64_t seed = 0) {
  ScenarioSpec s;
  s.seed = seed;
  s.dims = dims;
  for (std::size_t i = 0; i < n_users; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "user%02zu", i + 1);
    s.users.push_back({id, std::string("cam-") + id, reference_images, test_images, std::nullopt});
  }
  return s;
}

struct ShotInfo {
  std::string user_id;
  std::string camera_id;
  std::size_t index = 0;
  bool reference = true;
};

// Renders scenario images on demand. Images are a pure function of the
// spec and the image id, so loading order and concurrency do not matter.
class ScenarioSource final : public ImageSource {
 public:
  explicit ScenarioSource(ScenarioSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    for (const auto& u : spec_.users) {
      if (!cameras_.count(u.camera_id))
        cameras_.emplace(u.camera_id, make_camera(derive_seed(spec_.seed, "camera", u.camera_id), spec_.dims,
                                                  spec_.strength, spec_.profile_for(u), u.camera_id));
      UserImageSet set;
      set.user_id = u.user_id;
      for (std::size_t i = 0; i < u.reference_images + u.test_images; ++i) {
        const bool ref = i < u.reference_images;
        const auto& cam = cameras_.at(u.camera_id);
        char name[64];
        std::snprintf(name, sizeof name, "%s/img_%03zu.%s", u.user_id.c_str(), i,
                      cam.nua.jpeg_quality ? "jpg" : "png");
        shots_.emplace(name, ShotInfo{u.user_id, u.camera_id, i, ref});
        (ref ? set.reference : set.test).push_back(name);
      }
      sets_.push_back(std::move(set));
    }
  }

  const ScenarioSpec& spec() const noexcept { return spec_; }
  const std::vector<UserImageSet>& user_sets() const noexcept { return sets_; }
  const SynthCamera& camera(const std::string& camera_id) const { return cameras_.at(camera_id); }
  const std::map<std::string, ShotInfo>& shots() const noexcept { return shots_; }

  const ShotInfo& shot(const std::string& image_id) const {
    auto it = shots_.find(image_id);
    if (it == shots_.end()) throw Error(ErrorKind::lookup, "unknown synthetic image '" + image_id + "'");
    return it->second;
  }

  // Pre-JPEG raster of an image.
  Matrix expose_image(const std::string& image_id) const {
    const auto& s = shot(image_id);
    const auto scene = make_scene(spec_.scene, spec_.dims, derive_seed(spec_.seed, "scene", s.user_id, s.index));
    return expose(cameras_.at(s.camera_id), scene, spec_.read_noise_std,
                  derive_seed(spec_.seed, "noise", s.user_id, s.index));
  }

  ExifRecord exif_for(const std::string& image_id) const {
    const auto& s = shot(image_id);
    const auto& cam = cameras_.at(s.camera_id);
    ExifRecord e;
    e.make = spec_.make;
    e.model = spec_.model;
    e.software = spec_.software;
    e.focal_length = round_focal_length(spec_.focal_length);
    e.digital_zoom = s.reference ? 1.0 : spec_.test_digital_zoom;
    e.pixel_dims = spec_.dims;
    if (!cam.shared_pattern.empty() && !spec_.shared_pattern_tag.empty()) e.custom_rendered = spec_.shared_pattern_tag;
    return e;
  }

  // Encoded file bytes: JPEG at the camera quality, PNG when lossless.
  std::vector<std::uint8_t> encode(const std::string& image_id) const {
    const Matrix ch[1] = {expose_image(image_id)};
    const auto exif = exif_for(image_id);
    const auto& cam = cameras_.at(shot(image_id).camera_id);
    return cam.nua.jpeg_quality ? encode_jpeg(ch, *cam.nua.jpeg_quality, &exif) : encode_png(ch, &exif);
  }

  DecodedImage load(const std::string& image_id) const override {
    const auto& cam = cameras_.at(shot(image_id).camera_id);
    Matrix px = expose_image(image_id);
    if (cam.nua.jpeg_quality) px = jpeg_round_trip(px, *cam.nua.jpeg_quality);
    else
      for (double& v : px.data()) v = std::round(v);  // same 8-bit samples as the PNG file
    return {ImagePlane::clamped(std::move(px)), exif_for(image_id)};
  }

 private:
  ScenarioSpec spec_;
  std::map<std::string, SynthCamera> cameras_;
  std::map<std::string, ShotInfo> shots_;
  std::vector<UserImageSet> sets_;
};

struct ScenarioFiles {
  std::filesystem::path root;
  std::filesystem::path manifest;
  std::filesystem::path ground_truth;
  std::filesystem::path curate_config;
  std::filesystem::path campaign_config;
  std::vector<std::filesystem::path> images;
};

// Writes images, manifest.csv (user_id,image_path), ground_truth.json and
// ready-to-run curate.json / campaign.json next to them.
inline ScenarioFiles write_scenario(const ScenarioSpec& spec, const std::filesystem::path& root,
                                    const std::filesystem::path& blacklist, std::size_t workers = 1) {
  ScenarioSource src(spec);
  ScenarioFiles files;
  files.root = root;
  std::filesystem::create_directories(root);
  std::vector<std::string> ids;
  for (const auto& [id, shot] : src.shots()) ids.push_back(id);
  for (const auto& u : spec.users) std::filesystem::create_directories(root / "images" / u.user_id);
  parallel_for(ids.size(), workers, [&](std::size_t i) { write_file_bytes(root / "images" / ids[i], src.encode(ids[i])); });

  files.manifest = root / "manifest.csv";
  {
    std::ofstream m(files.manifest);
    m << "user_id,image_path\n";
    for (const auto& id : ids) m << src.shot(id).user_id << ",images/" << id << "\n";
  }
  for (const auto& id : ids) files.images.push_back(root / "images" / id);

  nlohmann::json truth = {{"spec", spec.to_json()}, {"images", nlohmann::json::object()}};
  for (const auto& id : ids) {
    const auto& s = src.shot(id);
    truth["images"]["images/" + id] = {{"user_id", s.user_id}, {"camera_id", s.camera_id},
                                       {"role", s.reference ? "reference" : "test"}};
  }
  files.ground_truth = root / "ground_truth.json";
  std::ofstream(files.ground_truth) << truth.dump(2) << "\n";

  const std::string name = unit_name(spec.model, spec.dims);
  files.curate_config = root / "curate.json";
  std::ofstream(files.curate_config) << nlohmann::json{
      {"blacklist", std::filesystem::absolute(blacklist).string()},
      {"reference_min", 20},
      {"reference_max", 35},
      {"units",
       {{{"make", spec.make},
         {"model", spec.model},
         {"resolution", {spec.dims.width, spec.dims.height}},
         {"manifest", "manifest.csv"}}}}}.dump(2)
                                     << "\n";
  files.campaign_config = root / "campaign.json";
  std::ofstream(files.campaign_config) << nlohmann::json{
      {"seed", spec.seed}, {"mismatch_budget", 200}, {"units", {{{"curated", "curated/" + name + ".json"}}}}}.dump(2)
                                       << "\n";
  return files;
}

}  // namespace prnulab::synth
