#pragma once

// Full-range BT.601 RGB <-> YCbCr on [0, 1] pixel values.

#include <algorithm>

#include "flickerband/image.hpp"

namespace flickerband {

inline constexpr double kKr = 0.299;
inline constexpr double kKb = 0.114;
inline constexpr double kKg = 1.0 - kKr - kKb;  // 0.587

struct Ycc {
  double y, cb, cr;
};
struct Rgb {
  double r, g, b;
};

constexpr Ycc rgb_to_ycc(Rgb p) noexcept {
  const double y = kKr * p.r + kKg * p.g + kKb * p.b;
  return {y, (p.b - y) / (2.0 * (1.0 - kKb)), (p.r - y) / (2.0 * (1.0 - kKr))};
}

/// Exact algebraic inverse of rgb_to_ycc; no clamping.
constexpr Rgb ycc_to_rgb_unclamped(Ycc p) noexcept {
  const double r = p.y + 2.0 * (1.0 - kKr) * p.cr;
  const double b = p.y + 2.0 * (1.0 - kKb) * p.cb;
  const double g = (p.y - kKr * r - kKb * b) / kKg;
  return {r, g, b};
}

inline YccImage rgb_to_ycc(const RgbImage& img) {
  YccImage out(img.width(), img.height());
  const std::size_t n = img.c0.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Ycc p = rgb_to_ycc(Rgb{img.c0.values()[i], img.c1.values()[i], img.c2.values()[i]});
    out.c0.values()[i] = p.y;
    out.c1.values()[i] = p.cb;
    out.c2.values()[i] = p.cr;
  }
  return out;
}

/// Inverse transform; clamps the result to [0, 1] unless `clamp` is false.
inline RgbImage ycc_to_rgb(const YccImage& img, bool clamp = true) {
  RgbImage out(img.width(), img.height());
  const std::size_t n = img.c0.size();
  for (std::size_t i = 0; i < n; ++i) {
    Rgb p = ycc_to_rgb_unclamped(Ycc{img.c0.values()[i], img.c1.values()[i], img.c2.values()[i]});
    if (clamp) {
      p.r = std::clamp(p.r, 0.0, 1.0);
      p.g = std::clamp(p.g, 0.0, 1.0);
      p.b = std::clamp(p.b, 0.0, 1.0);
    }
    out.c0.values()[i] = p.r;
    out.c1.values()[i] = p.g;
    out.c2.values()[i] = p.b;
  }
  return out;
}

}  // namespace flickerband
