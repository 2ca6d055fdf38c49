#pragma once

// Luminance-domain banding plus heteroscedastic sensor noise: HQ -> LQ.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "flickerband/colorspace.hpp"
#include "flickerband/geometry.hpp"
#include "flickerband/image.hpp"
#include "flickerband/mask.hpp"
#include "flickerband/rng.hpp"

namespace flickerband {

/// out = v_y * Y * M + Y * (1 - M). Evaluated as Y * (1 - M (1 - v_y)) and
/// rounded into [v_y * Y, Y], the exact range of the convex combination.
inline Plane apply_banding_luma(const Plane& y_plane, const FlickerMask& mask, double v_y) {
  if (!y_plane.same_shape(mask.values))
    throw std::invalid_argument("apply_banding_luma: dimension mismatch");
  if (!(v_y > 0.0 && v_y <= 1.0)) throw std::invalid_argument("apply_banding_luma: v_y outside (0, 1]");
  Plane out(y_plane.width(), y_plane.height());
  const double dark = 1.0 - v_y;
  const auto& yv = y_plane.values();
  const auto& mv = mask.values.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < yv.size(); ++i) {
    const double y = yv[i];
    const double banded = v_y * y;
    const double lo = std::min(banded, y);
    const double hi = std::max(banded, y);
    ov[i] = std::clamp(y * (1.0 - mv[i] * dark), lo, hi);
  }
  return out;
}

/// out = I + sqrt(alpha I + sigma_r^2) * eps, eps ~ N(0, 1) i.i.d. per pixel
/// and channel. Draws are counter-based on (key, channel, pixel index), so
/// the result does not depend on evaluation order.
inline RgbImage sensor_noise(const RgbImage& img, double alpha, double sigma_r, std::uint64_t key,
                             bool clamp = true) {
  if (alpha < 0.0 || sigma_r < 0.0) throw std::invalid_argument("sensor_noise: negative strength");
  RgbImage out = img;
  if (alpha == 0.0 && sigma_r == 0.0) {
    if (clamp) clamp_unit(out);
    return out;
  }
  const double read_var = sigma_r * sigma_r;
  const std::size_t n = img.c0.size();
  for (int c = 0; c < 3; ++c) {
    const std::uint64_t stream = hash_combine(key, static_cast<std::uint64_t>(c));
    auto& v = out.plane(c).values();
    for (std::size_t i = 0; i < n; ++i) {
      const double sd = std::sqrt(std::max(alpha * v[i] + read_var, 0.0));
      if (sd > 0.0) v[i] += sd * counter_normal(stream, i);
    }
  }
  if (clamp) clamp_unit(out);
  return out;
}

struct DegradationOutput {
  RgbImage lq;
  FlickerMask mask;
  JitterTrace trace;
  BandingParams params;
};

/// Banded YCbCr image before recomposition; chroma planes are the HQ ones.
inline YccImage banded_ycc(const YccImage& hq, const FlickerMask& mask, double v_y) {
  return {apply_banding_luma(hq.c0, mask, v_y), hq.c1, hq.c2};
}

/// Noise stream key for a realization; distinct from the jitter streams.
inline std::uint64_t noise_key(const BandingParams& p) noexcept {
  return Rng(p.seed).split(0x4015e).state();
}

/// Full pipeline: jitter -> mask -> YCbCr -> luma banding -> RGB -> noise.
inline DegradationOutput synthesize_lq(const RgbImage& hq, const BandingParams& params) {
  validate(params);
  if (hq.width() < 1 || hq.height() < 1) throw std::invalid_argument("synthesize_lq: empty image");
  DegradationOutput out;
  out.params = params;
  out.trace = sample_jitter_for_image(params, hq.width(), hq.height());
  out.mask = render_mask(params, out.trace, hq.width(), hq.height());
  // Unclamped recomposition; the only clamp is on the final noisy image.
  const RgbImage composed =
      ycc_to_rgb(banded_ycc(rgb_to_ycc(hq), out.mask, params.v_y), /*clamp=*/false);
  out.lq = sensor_noise(composed, params.noise_alpha, params.noise_sigma_r, noise_key(params));
  return out;
}

}  // namespace flickerband
