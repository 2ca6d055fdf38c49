#pragma once

// 8-bit PNG and PFM image I/O, quantization, and atomic file writes.
// Requires linking libpng.

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "flickerband/image.hpp"
#include "flickerband/mask.hpp"

namespace flickerband {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Interleaved 8-bit image, 1 or 3 channels.
struct Image8 {
  int width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> pixels;

  friend bool operator==(const Image8&, const Image8&) = default;
};

inline std::uint8_t quantize(double v) noexcept {
  const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<std::uint8_t>(std::lround(255.0 * c));
}

inline Image8 quantize(const RgbImage& img) {
  Image8 out{img.width(), img.height(), 3, {}};
  out.pixels.resize(static_cast<std::size_t>(img.width()) * img.height() * 3);
  const std::size_t n = img.c0.size();
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) out.pixels[3 * i + c] = quantize(img.plane(c).values()[i]);
  return out;
}

inline Image8 quantize(const Plane& p) {
  Image8 out{p.width(), p.height(), 1, {}};
  out.pixels.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out.pixels[i] = quantize(p.values()[i]);
  return out;
}

inline Image8 quantize(const FlickerMask& m) { return quantize(m.values); }

/// Gray inputs are replicated into all three planes.
inline RgbImage to_rgb(const Image8& img) {
  if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("to_rgb: 1 or 3 channels expected");
  RgbImage out(img.width, img.height);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      out.plane(c).values()[i] = img.pixels[i * img.channels + (img.channels == 3 ? c : 0)] / 255.0;
  return out;
}

inline Plane to_plane(const Image8& img) {
  if (img.channels != 1) throw std::invalid_argument("to_plane: single channel expected");
  Plane out(img.width, img.height);
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = img.pixels[i] / 255.0;
  return out;
}

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace detail

/// Decodes any PNG to 8-bit gray (channels == 1) or RGB (channels == 3).
/// Alpha is dropped; 16-bit samples are reduced; palettes are expanded.
inline Image8 read_png(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw IoError("not a PNG file: " + path.string());

  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_fn,
                                           detail::png_warning_fn);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  Image8 out;
  std::vector<png_bytep> rows;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    throw IoError("corrupt PNG " + path.string() + (err.empty() ? "" : ": " + err));
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_strip_16(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = static_cast<int>(png_get_channels(png, info));
  if (out.channels != 1 && out.channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported PNG channel layout: " + path.string());
  }
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
  rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y)
    rows[y] = out.pixels.data() + static_cast<std::size_t>(y) * out.width * out.channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
inline void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename into " + path.string() + ": " + ec.message());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Encodes to PNG bytes with fixed compression settings and no timestamps.
inline std::string encode_png(const Image8& img) {
  if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("encode_png: 1 or 3 channels");
  std::string out;
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_fn,
                                            detail::png_warning_fn);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw IoError("PNG encoding failed: " + err);
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t len) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), len);
      },
      nullptr);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(y) * img.width * img.channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline void write_png(const std::filesystem::path& path, const Image8& img) {
  atomic_write(path, encode_png(img));
}

inline RgbImage read_rgb(const std::filesystem::path& path) { return to_rgb(read_png(path)); }

inline FlickerMask read_mask(const std::filesystem::path& path) {
  const Image8 img = read_png(path);
  if (img.channels != 1) throw IoError("mask PNG must be single-channel: " + path.string());
  return FlickerMask(to_plane(img));
}

/// Grayscale Portable Float Map ("Pf"), little-endian, rows stored bottom-up.
inline Plane read_pfm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::istringstream in(bytes);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  if (magic != "Pf" || w <= 0 || h <= 0 || scale == 0.0) throw IoError("not a grayscale PFM: " + path.string());
  in.get();
  const auto offset = static_cast<std::size_t>(in.tellg());
  if (bytes.size() < offset + static_cast<std::size_t>(w) * h * 4) throw IoError("truncated PFM: " + path.string());
  const bool little = scale < 0.0;
  Plane out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t at = offset + (static_cast<std::size_t>(h - 1 - y) * w + x) * 4;
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        const auto byte = static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + b]));
        bits |= little ? byte << (8 * b) : byte << (8 * (3 - b));
      }
      float f;
      std::memcpy(&f, &bits, 4);
      out(x, y) = f;
    }
  return out;
}

inline void write_pfm(const std::filesystem::path& path, const Plane& p) {
  std::string bytes = "Pf\n" + std::to_string(p.width()) + " " + std::to_string(p.height()) + "\n-1.0\n";
  for (int y = p.height() - 1; y >= 0; --y)
    for (int x = 0; x < p.width(); ++x) {
      const float f = static_cast<float>(p(x, y));
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
    }
  atomic_write(path, bytes);
}

}  // namespace flickerband
