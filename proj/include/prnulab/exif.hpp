#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prnulab/raster.hpp"

// Minimal TIFF/Exif IFD reader and writer. Only the tags backing
// ExifRecord are interpreted; everything else is skipped.
namespace prnulab::exif {

namespace tag {
inline constexpr std::uint16_t image_width = 0x0100;
inline constexpr std::uint16_t image_length = 0x0101;
inline constexpr std::uint16_t make = 0x010F;
inline constexpr std::uint16_t model = 0x0110;
inline constexpr std::uint16_t software = 0x0131;
inline constexpr std::uint16_t exif_ifd = 0x8769;
inline constexpr std::uint16_t gps_ifd = 0x8825;
inline constexpr std::uint16_t focal_length = 0x920A;
inline constexpr std::uint16_t pixel_x = 0xA002;
inline constexpr std::uint16_t pixel_y = 0xA003;
inline constexpr std::uint16_t custom_rendered = 0xA401;
inline constexpr std::uint16_t digital_zoom = 0xA404;
inline constexpr std::uint16_t body_serial = 0xA431;
inline constexpr std::uint16_t gps_lat_ref = 0x0001;
inline constexpr std::uint16_t gps_lat = 0x0002;
inline constexpr std::uint16_t gps_lon_ref = 0x0003;
inline constexpr std::uint16_t gps_lon = 0x0004;
}  // namespace tag

enum class FieldType : std::uint16_t {
  byte = 1, ascii = 2, short_ = 3, long_ = 4, rational = 5,
  undefined = 7, slong = 9, srational = 10,
};

inline std::size_t type_size(std::uint16_t type) {
  switch (type) {
    case 1: case 2: case 6: case 7: return 1;
    case 3: case 8: return 2;
    case 4: case 9: case 11: return 4;
    case 5: case 10: case 12: return 8;
    default: return 0;
  }
}

// Exif CustomRendered values as written by Apple and others.
inline std::string custom_rendered_name(unsigned value) {
  static const std::map<unsigned, std::string> names = {
      {0, "Normal"}, {1, "Custom"}, {2, "HDR (no original saved)"},
      {3, "HDR (original saved)"}, {4, "Original (for HDR)"}, {6, "Panorama"},
      {7, "Portrait HDR"}, {8, "Portrait"}};
  auto it = names.find(value);
  return it != names.end() ? it->second : "Unknown (" + std::to_string(value) + ")";
}

inline std::optional<unsigned> custom_rendered_code(const std::string& name) {
  for (unsigned v = 0; v <= 8; ++v)
    if (custom_rendered_name(v) == name) return v;
  return std::nullopt;
}

namespace detail {

class TiffReader {
 public:
  explicit TiffReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {
    if (bytes_.size() < 8) return;
    if (bytes_[0] == 'I' && bytes_[1] == 'I') little_ = true;
    else if (bytes_[0] == 'M' && bytes_[1] == 'M') little_ = false;
    else return;
    valid_ = u16(2).value_or(0) == 42;
  }

  bool valid() const noexcept { return valid_; }

  std::optional<std::uint16_t> u16(std::size_t off) const {
    if (off + 2 > bytes_.size()) return std::nullopt;
    const std::uint16_t a = bytes_[off], b = bytes_[off + 1];
    return static_cast<std::uint16_t>(little_ ? (a | (b << 8)) : ((a << 8) | b));
  }
  std::optional<std::uint32_t> u32(std::size_t off) const {
    if (off + 4 > bytes_.size()) return std::nullopt;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint32_t byte = bytes_[off + static_cast<std::size_t>(little_ ? 3 - i : i)];
      v = (v << 8) | byte;
    }
    return v;
  }

  struct Entry {
    std::uint16_t tag;
    std::uint16_t type;
    std::uint32_t count;
    std::size_t data_offset;  // absolute offset of the value bytes
  };

  std::vector<Entry> read_ifd(std::size_t off) const {
    std::vector<Entry> out;
    auto n = u16(off);
    if (!n) return out;
    for (std::size_t i = 0; i < *n; ++i) {
      const std::size_t e = off + 2 + 12 * i;
      auto t = u16(e), ty = u16(e + 2);
      auto cnt = u32(e + 4);
      if (!t || !ty || !cnt) break;
      const std::size_t sz = type_size(*ty);
      if (sz == 0) continue;
      const std::uint64_t total = static_cast<std::uint64_t>(sz) * *cnt;
      std::size_t data = e + 8;
      if (total > 4) {
        auto p = u32(e + 8);
        if (!p) continue;
        data = *p;
      }
      if (data + total > bytes_.size()) continue;
      out.push_back({*t, *ty, *cnt, data});
    }
    return out;
  }

  std::optional<std::string> ascii(const Entry& e) const {
    if (e.type != 2 && e.type != 7 && e.type != 1) return std::nullopt;
    std::string s(reinterpret_cast<const char*>(bytes_.data() + e.data_offset), e.count);
    while (!s.empty() && (s.back() == '\0' || s.back() == ' ')) s.pop_back();
    const auto nul = s.find('\0');
    if (nul != std::string::npos) s.resize(nul);
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    if (s.empty()) return std::nullopt;
    return s;
  }

  std::optional<std::uint32_t> integer(const Entry& e, std::size_t index = 0) const {
    if (index >= e.count) return std::nullopt;
    switch (e.type) {
      case 1: case 7: return bytes_[e.data_offset + index];
      case 3: return u16(e.data_offset + 2 * index);
      case 4: case 9: return u32(e.data_offset + 4 * index);
      default: return std::nullopt;
    }
  }

  // nullopt for missing data or a zero denominator.
  std::optional<double> rational(const Entry& e, std::size_t index = 0) const {
    if ((e.type != 5 && e.type != 10) || index >= e.count) return std::nullopt;
    auto num = u32(e.data_offset + 8 * index);
    auto den = u32(e.data_offset + 8 * index + 4);
    if (!num || !den || *den == 0) return std::nullopt;
    if (e.type == 10)
      return static_cast<double>(static_cast<std::int32_t>(*num)) /
             static_cast<double>(static_cast<std::int32_t>(*den));
    return static_cast<double>(*num) / static_cast<double>(*den);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool little_ = true;
  bool valid_ = false;
};

inline std::optional<double> read_gps_angle(const TiffReader& rd, const TiffReader::Entry& e) {
  if (e.count < 3) return std::nullopt;
  auto d = rd.rational(e, 0), m = rd.rational(e, 1), s = rd.rational(e, 2);
  if (!d || !m || !s) return std::nullopt;
  return *d + *m / 60.0 + *s / 3600.0;
}

}  // namespace detail

// Parses a TIFF-structured Exif block (the payload after "Exif\0\0" in a JPEG
// APP1 segment, a PNG eXIf chunk, or a whole TIFF file). Malformed entries
// are skipped. pixel_dims is filled from the Exif pixel dimension tags when
// present and otherwise left at 0x0 for the decoder to overwrite.
inline ExifRecord parse_tiff(std::span<const std::uint8_t> bytes) {
  ExifRecord rec;
  detail::TiffReader rd(bytes);
  if (!rd.valid()) return rec;
  auto ifd0 = rd.u32(4);
  if (!ifd0) return rec;

  std::optional<std::uint32_t> exif_off, gps_off;
  for (const auto& e : rd.read_ifd(*ifd0)) {
    switch (e.tag) {
      case tag::make: rec.make = rd.ascii(e); break;
      case tag::model: rec.model = rd.ascii(e); break;
      case tag::software: rec.software = rd.ascii(e); break;
      case tag::exif_ifd: exif_off = rd.integer(e); break;
      case tag::gps_ifd: gps_off = rd.integer(e); break;
      default: break;
    }
  }
  std::optional<std::uint32_t> px, py;
  if (exif_off) {
    for (const auto& e : rd.read_ifd(*exif_off)) {
      switch (e.tag) {
        case tag::focal_length:
          if (auto f = rd.rational(e)) rec.focal_length = round_focal_length(*f);
          break;
        case tag::digital_zoom:
          // A zero numerator means "digital zoom not used"; it is kept absent.
          if (auto z = rd.rational(e); z && *z > 0.0) rec.digital_zoom = *z;
          break;
        case tag::custom_rendered:
          if (e.type == 2) rec.custom_rendered = rd.ascii(e);
          else if (auto v = rd.integer(e)) rec.custom_rendered = custom_rendered_name(*v);
          break;
        case tag::body_serial: rec.body_serial = rd.ascii(e); break;
        case tag::pixel_x: px = rd.integer(e); break;
        case tag::pixel_y: py = rd.integer(e); break;
        default: break;
      }
    }
  }
  if (px && py) rec.pixel_dims = {*px, *py};
  if (gps_off) {
    std::optional<std::string> lat_ref, lon_ref;
    std::optional<double> lat, lon;
    for (const auto& e : rd.read_ifd(*gps_off)) {
      switch (e.tag) {
        case tag::gps_lat_ref: lat_ref = rd.ascii(e); break;
        case tag::gps_lon_ref: lon_ref = rd.ascii(e); break;
        case tag::gps_lat: lat = detail::read_gps_angle(rd, e); break;
        case tag::gps_lon: lon = detail::read_gps_angle(rd, e); break;
        default: break;
      }
    }
    if (lat && lon) {
      GpsCoordinate g{*lat, *lon};
      if (lat_ref && *lat_ref == "S") g.latitude = -g.latitude;
      if (lon_ref && *lon_ref == "W") g.longitude = -g.longitude;
      rec.gps = g;
    }
  }
  return rec;
}

namespace detail {

class IfdBuilder {
 public:
  void ascii(std::uint16_t t, const std::string& s) {
    std::vector<std::uint8_t> v(s.begin(), s.end());
    v.push_back(0);
    const auto count = static_cast<std::uint32_t>(v.size());
    add(t, 2, count, std::move(v));
  }
  void short_(std::uint16_t t, std::uint16_t value) {
    add(t, 3, 1, {static_cast<std::uint8_t>(value & 0xFF), static_cast<std::uint8_t>(value >> 8)});
  }
  void long_(std::uint16_t t, std::uint32_t value) { add(t, 4, 1, le32(value)); }
  void rationals(std::uint16_t t, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& rs) {
    std::vector<std::uint8_t> v;
    for (auto [n, d] : rs) {
      auto a = le32(n), b = le32(d);
      v.insert(v.end(), a.begin(), a.end());
      v.insert(v.end(), b.begin(), b.end());
    }
    add(t, 5, static_cast<std::uint32_t>(rs.size()), std::move(v));
  }
  void set_long(std::uint16_t t, std::uint32_t value) {
    for (auto& e : entries_)
      if (e.tag == t) e.data = le32(value);
  }
  bool empty() const noexcept { return entries_.empty(); }

  std::size_t byte_size() const {
    std::size_t n = 2 + 12 * entries_.size() + 4;
    for (const auto& e : entries_)
      if (e.data.size() > 4) n += e.data.size() + (e.data.size() & 1);
    return n;
  }

  void serialize(std::vector<std::uint8_t>& out, std::uint32_t base) const {
    auto sorted = entries_;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.tag < b.tag; });
    std::uint32_t data_off = base + static_cast<std::uint32_t>(2 + 12 * sorted.size() + 4);
    std::vector<std::uint8_t> data;
    push16(out, static_cast<std::uint16_t>(sorted.size()));
    for (const auto& e : sorted) {
      push16(out, e.tag);
      push16(out, e.type);
      push32(out, e.count);
      if (e.data.size() <= 4) {
        auto v = e.data;
        v.resize(4, 0);
        out.insert(out.end(), v.begin(), v.end());
      } else {
        push32(out, data_off + static_cast<std::uint32_t>(data.size()));
        data.insert(data.end(), e.data.begin(), e.data.end());
        if (e.data.size() & 1) data.push_back(0);
      }
    }
    push32(out, 0);
    out.insert(out.end(), data.begin(), data.end());
  }

 private:
  struct E {
    std::uint16_t tag;
    std::uint16_t type;
    std::uint32_t count;
    std::vector<std::uint8_t> data;
  };
  void add(std::uint16_t t, std::uint16_t type, std::uint32_t count, std::vector<std::uint8_t> data) {
    entries_.push_back({t, type, count, std::move(data)});
  }
  static std::vector<std::uint8_t> le32(std::uint32_t v) {
    return {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
            static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
  }
  static void push16(std::vector<std::uint8_t>& o, std::uint16_t v) {
    o.push_back(static_cast<std::uint8_t>(v));
    o.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  static void push32(std::vector<std::uint8_t>& o, std::uint32_t v) {
    auto b = le32(v);
    o.insert(o.end(), b.begin(), b.end());
  }

  std::vector<E> entries_;
};

inline std::pair<std::uint32_t, std::uint32_t> to_rational(double v, std::uint32_t den = 100) {
  return {static_cast<std::uint32_t>(std::llround(std::abs(v) * den)), den};
}

}  // namespace detail

// Serializes a record as a little-endian TIFF block suitable for a JPEG APP1
// payload (after the "Exif\0\0" prefix) or a PNG eXIf chunk.
inline std::vector<std::uint8_t> write_tiff(const ExifRecord& rec) {
  detail::IfdBuilder ifd0, exif, gps;
  if (rec.make) ifd0.ascii(tag::make, *rec.make);
  if (rec.model) ifd0.ascii(tag::model, *rec.model);
  if (rec.software) ifd0.ascii(tag::software, *rec.software);

  if (rec.focal_length) exif.rationals(tag::focal_length, {detail::to_rational(*rec.focal_length)});
  if (rec.digital_zoom) exif.rationals(tag::digital_zoom, {detail::to_rational(*rec.digital_zoom)});
  if (rec.custom_rendered) {
    if (auto code = custom_rendered_code(*rec.custom_rendered))
      exif.short_(tag::custom_rendered, static_cast<std::uint16_t>(*code));
    else
      exif.ascii(tag::custom_rendered, *rec.custom_rendered);
  }
  if (rec.body_serial) exif.ascii(tag::body_serial, *rec.body_serial);
  if (rec.pixel_dims.area() > 0) {
    exif.long_(tag::pixel_x, static_cast<std::uint32_t>(rec.pixel_dims.width));
    exif.long_(tag::pixel_y, static_cast<std::uint32_t>(rec.pixel_dims.height));
  }
  if (rec.gps) {
    auto dms = [](double deg) {
      deg = std::abs(deg);
      const double d = std::floor(deg);
      const double m = std::floor((deg - d) * 60.0);
      const double s = ((deg - d) * 60.0 - m) * 60.0;
      return std::vector<std::pair<std::uint32_t, std::uint32_t>>{
          {static_cast<std::uint32_t>(d), 1}, {static_cast<std::uint32_t>(m), 1},
          detail::to_rational(s, 10000)};
    };
    gps.ascii(tag::gps_lat_ref, rec.gps->latitude < 0 ? "S" : "N");
    gps.rationals(tag::gps_lat, dms(rec.gps->latitude));
    gps.ascii(tag::gps_lon_ref, rec.gps->longitude < 0 ? "W" : "E");
    gps.rationals(tag::gps_lon, dms(rec.gps->longitude));
  }

  if (!exif.empty()) ifd0.long_(tag::exif_ifd, 0);
  if (!gps.empty()) ifd0.long_(tag::gps_ifd, 0);
  const std::uint32_t ifd0_off = 8;
  const auto exif_off = static_cast<std::uint32_t>(ifd0_off + ifd0.byte_size());
  const auto gps_off = static_cast<std::uint32_t>(exif_off + (exif.empty() ? 0 : exif.byte_size()));
  if (!exif.empty()) ifd0.set_long(tag::exif_ifd, exif_off);
  if (!gps.empty()) ifd0.set_long(tag::gps_ifd, gps_off);

  std::vector<std::uint8_t> out = {'I', 'I', 42, 0, 8, 0, 0, 0};
  ifd0.serialize(out, ifd0_off);
  if (!exif.empty()) exif.serialize(out, exif_off);
  if (!gps.empty()) gps.serialize(out, gps_off);
  return out;
}

}  // namespace prnulab::exif
