#pragma once

#include <algorithm>
#include <csetjmp>
#include <cstdlib>
#include <cstring>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>
#include <tiffio.h>

#include "prnulab/exif.hpp"
#include "prnulab/raster.hpp"

// Raster decoding (JPEG, PNG, TIFF) into the luminance plane plus Exif, and
// the encoders the simulator needs.
namespace prnulab {

struct DecodedImage {
  ImagePlane plane;
  ExifRecord exif;
};

enum class RasterFormat { jpeg, png, tiff, unknown };

inline RasterFormat sniff_format(std::span<const std::uint8_t> b) {
  if (b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF) return RasterFormat::jpeg;
  if (b.size() >= 8 && b[0] == 0x89 && b[1] == 'P' && b[2] == 'N' && b[3] == 'G')
    return RasterFormat::png;
  if (b.size() >= 4 && ((b[0] == 'I' && b[1] == 'I' && b[2] == 42 && b[3] == 0) ||
                        (b[0] == 'M' && b[1] == 'M' && b[2] == 0 && b[3] == 42)))
    return RasterFormat::tiff;
  return RasterFormat::unknown;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::decode, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::decode, "read failure on '" + path.string() + "'");
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
}

namespace detail {

// Interleaved 8/16-bit samples reduced to luminance. Channels: 1 gray, 3 rgb.
inline ImagePlane planes_to_luminance(const std::vector<double>& interleaved, std::size_t w,
                                      std::size_t h, int channels) {
  if (channels == 1) return ImagePlane(Matrix(w, h, interleaved));
  Matrix r(w, h), g(w, h), b(w, h);
  for (std::size_t i = 0; i < w * h; ++i) {
    r[i] = interleaved[3 * i];
    g[i] = interleaved[3 * i + 1];
    b[i] = interleaved[3 * i + 2];
  }
  return to_luminance(ImagePlane(std::move(r)), ImagePlane(std::move(g)), ImagePlane(std::move(b)));
}

inline void check_min_size(std::size_t w, std::size_t h) {
  if (w < ImagePlane::kMinSide || h < ImagePlane::kMinSide)
    throw Error(ErrorKind::size, "raster " + std::to_string(w) + "x" + std::to_string(h) +
                                     " is below the 64x64 minimum");
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

extern "C" inline void jpeg_error_exit_to_jump(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, mgr->message);
  std::longjmp(mgr->jump, 1);
}

extern "C" inline void jpeg_silent_output(j_common_ptr) {}

inline std::vector<std::uint8_t> exif_payload_from_app1(const jpeg_saved_marker_ptr marker) {
  static constexpr std::uint8_t kPrefix[6] = {'E', 'x', 'i', 'f', 0, 0};
  for (auto m = marker; m != nullptr; m = m->next) {
    if (m->marker != JPEG_APP0 + 1 || m->data_length < 6) continue;
    if (std::memcmp(m->data, kPrefix, 6) != 0) continue;
    return {m->data + 6, m->data + m->data_length};
  }
  return {};
}

struct JpegDecoded {
  std::vector<double> samples;
  std::size_t width = 0, height = 0;
  int channels = 0;
  std::vector<std::uint8_t> exif;
};

// Integer slow DCT and triangular ("fancy") chroma upsampling so decoding
// is bit-reproducible.
inline JpegDecoded decode_jpeg_raw(std::span<const std::uint8_t> bytes) {
  JpegDecoded out;
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit_to_jump;
  err.base.output_message = jpeg_silent_output;
  std::vector<JSAMPLE> row;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorKind::decode, std::string("jpeg: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_save_markers(&cinfo, JPEG_APP0 + 1, 0xFFFF);
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.jpeg_color_space == JCS_CMYK || cinfo.jpeg_color_space == JCS_YCCK) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorKind::format, "CMYK JPEG is not supported");
  }
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  cinfo.dct_method = JDCT_ISLOW;
  cinfo.do_fancy_upsampling = TRUE;
  out.exif = exif_payload_from_app1(cinfo.marker_list);
  jpeg_start_decompress(&cinfo);
  out.width = cinfo.output_width;
  out.height = cinfo.output_height;
  out.channels = cinfo.output_components;
  const std::size_t stride = out.width * static_cast<std::size_t>(out.channels);
  out.samples.resize(stride * out.height);
  row.resize(stride);
  while (cinfo.output_scanline < cinfo.output_height) {
    const std::size_t y = cinfo.output_scanline;
    JSAMPROW rp = row.data();
    jpeg_read_scanlines(&cinfo, &rp, 1);
    for (std::size_t i = 0; i < stride; ++i) out.samples[y * stride + i] = row[i];
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

struct PngDecoded {
  std::vector<double> samples;
  std::size_t width = 0, height = 0;
  int channels = 0;
  std::vector<std::uint8_t> exif;
};

struct PngReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

extern "C" inline void png_read_from_span(png_structp png, png_bytep dst, png_size_t n) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + n > cur->bytes.size()) png_error(png, "truncated stream");
  std::memcpy(dst, cur->bytes.data() + cur->pos, n);
  cur->pos += n;
}

extern "C" inline void png_silent_warning(png_structp, png_const_charp) {}

inline PngDecoded decode_png_raw(std::span<const std::uint8_t> bytes) {
  PngDecoded out;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_silent_warning);
  if (!png) throw Error(ErrorKind::decode, "png: out of memory");
  png_infop info = png_create_info_struct(png);
  PngReadCursor cursor{bytes, 0};
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::decode, "png: corrupt stream");
  }
  png_set_read_fn(png, &cursor, png_read_from_span);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  out.channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * out.height);
  rows.resize(out.height);
  for (std::size_t y = 0; y < out.height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, info);
  png_uint_32 exif_len = 0;
  png_bytep exif_data = nullptr;
  if (png_get_eXIf_1(png, info, &exif_len, &exif_data) != 0 && exif_data != nullptr)
    out.exif.assign(exif_data, exif_data + exif_len);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = out.width * out.height * static_cast<std::size_t>(out.channels);
  out.samples.resize(n);
  if (out_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint16_t v = static_cast<std::uint16_t>(buffer[2 * i] | (buffer[2 * i + 1] << 8));
      out.samples[i] = static_cast<double>(v) / 257.0;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = buffer[i];
  }
  if (out.channels == 2) out.channels = 1;  // gray+alpha after strip is gray
  return out;
}

struct TiffMemory {
  std::span<const std::uint8_t> bytes;
  toff_t pos = 0;
};

extern "C" inline tsize_t tiff_mem_read(thandle_t h, tdata_t buf, tsize_t n) {
  auto* m = static_cast<TiffMemory*>(h);
  const auto avail = static_cast<tsize_t>(m->bytes.size() - std::min<toff_t>(m->pos, m->bytes.size()));
  const tsize_t k = std::min(n, avail);
  if (k > 0) std::memcpy(buf, m->bytes.data() + m->pos, static_cast<std::size_t>(k));
  m->pos += static_cast<toff_t>(k);
  return k;
}
extern "C" inline tsize_t tiff_mem_write(thandle_t, tdata_t, tsize_t) { return 0; }
extern "C" inline toff_t tiff_mem_seek(thandle_t h, toff_t off, int whence) {
  auto* m = static_cast<TiffMemory*>(h);
  if (whence == SEEK_SET) m->pos = off;
  else if (whence == SEEK_CUR) m->pos += off;
  else m->pos = m->bytes.size() + off;
  return m->pos;
}
extern "C" inline int tiff_mem_close(thandle_t) { return 0; }
extern "C" inline toff_t tiff_mem_size(thandle_t h) { return static_cast<TiffMemory*>(h)->bytes.size(); }
extern "C" inline int tiff_mem_map(thandle_t, tdata_t*, toff_t*) { return 0; }
extern "C" inline void tiff_mem_unmap(thandle_t, tdata_t, toff_t) {}

inline ImagePlane decode_tiff_plane(std::span<const std::uint8_t> bytes) {
  TIFFSetWarningHandler(nullptr);
  TIFFSetErrorHandler(nullptr);
  TiffMemory mem{bytes, 0};
  std::unique_ptr<TIFF, void (*)(TIFF*)> tif(
      TIFFClientOpen("memory", "rm", &mem, tiff_mem_read, tiff_mem_write, tiff_mem_seek,
                     tiff_mem_close, tiff_mem_size, tiff_mem_map, tiff_mem_unmap),
      [](TIFF* t) { if (t) TIFFClose(t); });
  if (!tif) throw Error(ErrorKind::decode, "tiff: cannot parse header");
  std::uint32_t w = 0, h = 0;
  std::uint16_t spp = 1;
  TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
  TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
  check_min_size(w, h);
  std::vector<std::uint32_t> rgba(static_cast<std::size_t>(w) * h);
  if (!TIFFReadRGBAImageOriented(tif.get(), w, h, rgba.data(), ORIENTATION_TOPLEFT, 0))
    throw Error(ErrorKind::decode, "tiff: unsupported or corrupt raster");
  const bool gray = spp == 1;
  std::vector<double> samples(static_cast<std::size_t>(w) * h * (gray ? 1 : 3));
  for (std::size_t i = 0; i < rgba.size(); ++i) {
    const std::uint32_t p = rgba[i];
    if (gray) {
      samples[i] = TIFFGetR(p);
    } else {
      samples[3 * i] = TIFFGetR(p);
      samples[3 * i + 1] = TIFFGetG(p);
      samples[3 * i + 2] = TIFFGetB(p);
    }
  }
  return planes_to_luminance(samples, w, h, gray ? 1 : 3);
}

inline ExifRecord finish_exif(ExifRecord rec, Dims decoded) {
  if (rec.pixel_dims.area() == 0) rec.pixel_dims = decoded;
  return rec;
}

}  // namespace detail

inline DecodedImage decode_image_bytes(std::span<const std::uint8_t> bytes) {
  switch (sniff_format(bytes)) {
    case RasterFormat::jpeg: {
      auto raw = detail::decode_jpeg_raw(bytes);
      detail::check_min_size(raw.width, raw.height);
      auto plane = detail::planes_to_luminance(raw.samples, raw.width, raw.height, raw.channels);
      auto rec = raw.exif.empty() ? ExifRecord{} : exif::parse_tiff(raw.exif);
      return {plane, detail::finish_exif(std::move(rec), plane.dims())};
    }
    case RasterFormat::png: {
      auto raw = detail::decode_png_raw(bytes);
      detail::check_min_size(raw.width, raw.height);
      auto plane = detail::planes_to_luminance(raw.samples, raw.width, raw.height, raw.channels);
      auto rec = raw.exif.empty() ? ExifRecord{} : exif::parse_tiff(raw.exif);
      return {plane, detail::finish_exif(std::move(rec), plane.dims())};
    }
    case RasterFormat::tiff: {
      auto plane = detail::decode_tiff_plane(bytes);
      auto rec = exif::parse_tiff(bytes);
      return {plane, detail::finish_exif(std::move(rec), plane.dims())};
    }
    case RasterFormat::unknown:
      break;
  }
  throw Error(ErrorKind::format, "not a JPEG, PNG or TIFF stream");
}

inline DecodedImage decode_image(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_image_bytes(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + std::string(e.what()).substr(
                                                    std::string(to_string(e.kind())).size() + 2));
  }
}

// 8-bit quantization: round half away from zero after clamping.
inline std::vector<std::uint8_t> quantize_u8(const Matrix& m) {
  std::vector<std::uint8_t> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(m[i], 0.0, 255.0)));
  return out;
}

// Encodes one (gray) or three (RGB) channel matrices.
inline std::vector<std::uint8_t> encode_jpeg(std::span<const Matrix> channels, int quality,
                                             const ExifRecord* exif_rec = nullptr) {
  if (channels.empty() || (channels.size() != 1 && channels.size() != 3))
    throw Error(ErrorKind::shape, "jpeg encoder takes 1 or 3 channels");
  const std::size_t w = channels[0].width(), h = channels[0].height();
  for (const auto& c : channels) require_same_dims(channels[0], c, "jpeg channels");
  std::vector<std::vector<std::uint8_t>> q;
  for (const auto& c : channels) q.push_back(quantize_u8(c));

  jpeg_compress_struct cinfo{};
  detail::JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = detail::jpeg_error_exit_to_jump;
  err.base.output_message = detail::jpeg_silent_output;
  unsigned char* mem = nullptr;
  unsigned long mem_size = 0;
  std::vector<std::uint8_t> tiff;
  std::vector<JSAMPLE> row;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(mem);
    throw Error(ErrorKind::io, std::string("jpeg encode: ") + err.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &mem, &mem_size);
  cinfo.image_width = static_cast<JDIMENSION>(w);
  cinfo.image_height = static_cast<JDIMENSION>(h);
  cinfo.input_components = static_cast<int>(channels.size());
  cinfo.in_color_space = channels.size() == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&cinfo);
  cinfo.dct_method = JDCT_ISLOW;
  jpeg_set_quality(&cinfo, std::clamp(quality, 1, 100), TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  if (exif_rec != nullptr) {
    tiff = exif::write_tiff(*exif_rec);
    tiff.insert(tiff.begin(), {'E', 'x', 'i', 'f', 0, 0});
    jpeg_write_marker(&cinfo, JPEG_APP0 + 1, tiff.data(), static_cast<unsigned>(tiff.size()));
  }
  row.resize(w * channels.size());
  while (cinfo.next_scanline < cinfo.image_height) {
    const std::size_t y = cinfo.next_scanline;
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < channels.size(); ++c) row[x * channels.size() + c] = q[c][y * w + x];
    JSAMPROW rp = row.data();
    jpeg_write_scanlines(&cinfo, &rp, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::vector<std::uint8_t> out(mem, mem + mem_size);
  std::free(mem);
  return out;
}

namespace detail {
extern "C" inline void png_write_to_vector(png_structp png, png_bytep data, png_size_t n) {
  auto* v = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  v->insert(v->end(), data, data + n);
}
extern "C" inline void png_flush_noop(png_structp) {}
}  // namespace detail

// 8-bit gray or RGB PNG, optionally with an eXIf chunk.
inline std::vector<std::uint8_t> encode_png(std::span<const Matrix> channels,
                                            const ExifRecord* exif_rec = nullptr) {
  if (channels.empty() || (channels.size() != 1 && channels.size() != 3))
    throw Error(ErrorKind::shape, "png encoder takes 1 or 3 channels");
  const std::size_t w = channels[0].width(), h = channels[0].height();
  for (const auto& c : channels) require_same_dims(channels[0], c, "png channels");
  std::vector<std::vector<std::uint8_t>> q;
  for (const auto& c : channels) q.push_back(quantize_u8(c));
  std::vector<std::uint8_t> pixels(w * h * channels.size());
  for (std::size_t i = 0; i < w * h; ++i)
    for (std::size_t c = 0; c < channels.size(); ++c) pixels[i * channels.size() + c] = q[c][i];

  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> tiff;
  std::vector<png_bytep> rows(h);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, detail::png_silent_warning);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::io, "png encode failed");
  }
  png_set_write_fn(png, &out, detail::png_write_to_vector, detail::png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               channels.size() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (exif_rec != nullptr) {
    tiff = exif::write_tiff(*exif_rec);
    png_set_eXIf_1(png, info, static_cast<png_uint_32>(tiff.size()), tiff.data());
  }
  for (std::size_t y = 0; y < h; ++y) rows[y] = pixels.data() + y * w * channels.size();
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

// Gray JPEG round trip through the same codec path used for files.
inline Matrix jpeg_round_trip(const Matrix& m, int quality) {
  const Matrix ch[1] = {m};
  auto bytes = encode_jpeg(ch, quality);
  auto raw = detail::decode_jpeg_raw(bytes);
  return Matrix(raw.width, raw.height, std::move(raw.samples));
}

}  // namespace prnulab
