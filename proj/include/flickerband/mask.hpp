#pragma once

// Feathered flicker-banding mask rendering.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "flickerband/geometry.hpp"
#include "flickerband/image.hpp"

namespace flickerband {

/// H x W field in [0, 1]: 1 = banding, 0 = clean, fractional = feathered edge.
struct FlickerMask {
  Plane values;

  FlickerMask() = default;
  explicit FlickerMask(Plane p) : values(std::move(p)) {
    for (double v : values.values())
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("FlickerMask: value outside [0, 1]");
  }
  FlickerMask(int width, int height, double fill) : values(width, height, fill) {}

  int width() const noexcept { return values.width(); }
  int height() const noexcept { return values.height(); }
  double operator()(int x, int y) const noexcept { return values(x, y); }

  friend bool operator==(const FlickerMask&, const FlickerMask&) = default;
};

namespace detail {

struct RealizedStripe {
  double center;
  double half_width;
  double cos_d, sin_d;
  const std::vector<double>* eta_top;
  const std::vector<double>* eta_bot;
};

/// Linear ramp over [-feather, +feather] around the hard edge; hard step when feather == 0.
inline double edge_ramp(double inside_dist, double feather) noexcept {
  if (feather <= 0.0) return inside_dist >= 0.0 ? 1.0 : 0.0;
  return std::clamp((inside_dist + feather) / (2.0 * feather), 0.0, 1.0);
}

}  // namespace detail

/// Renders the mask. Each stripe is evaluated in its own frame, tilted by its
/// angle offset about its midpoint; overlapping stripes combine by max.
inline FlickerMask render_mask(const BandingParams& p, const JitterTrace& t, int img_w, int img_h) {
  validate(p);
  validate(t);
  if (img_w < 1 || img_h < 1) throw std::invalid_argument("render_mask: zero-area image");
  const StripeCoverage cov = stripe_coverage(p, img_w, img_h);
  if (t.find(cov.k_first) < 0 || t.find(cov.k_first + cov.n_stripes - 1) < 0)
    throw std::invalid_argument("render_mask: trace does not cover the image extent");
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t.eta_top[i].empty() || t.eta_bot[i].empty())
      throw std::invalid_argument("render_mask: empty edge process in trace");

  const double P = p.period();
  const double F = p.feather_px;
  const double half_diag = 0.5 * std::hypot(img_w - 1.0, img_h - 1.0);

  std::vector<detail::RealizedStripe> stripes(t.size());
  double reach = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto& s = stripes[i];
    s.center = static_cast<double>(t.stripe_indices[i]) * P + p.phase_phi + t.spacing_offsets[i];
    s.half_width = 0.5 * (p.width_w + t.width_offsets[i]);
    s.cos_d = std::cos(t.angle_offsets[i]);
    s.sin_d = std::sin(t.angle_offsets[i]);
    s.eta_top = &t.eta_top[i];
    s.eta_bot = &t.eta_bot[i];
    double eta_max = 0.0;
    for (double e : t.eta_top[i]) eta_max = std::max(eta_max, std::abs(e));
    for (double e : t.eta_bot[i]) eta_max = std::max(eta_max, std::abs(e));
    // Largest |v - kP - phi| at which this stripe can still be nonzero.
    const double r = (s.half_width + p.delta_edge * eta_max + F +
                      std::abs(s.sin_d) * half_diag) / s.cos_d +
                     std::abs(t.spacing_offsets[i]) + 1.0;
    reach = std::max(reach, r);
  }

  const double cos_t = std::cos(p.theta);
  const double sin_t = std::sin(p.theta);
  const std::int64_t k0 = t.stripe_indices.front();
  const std::int64_t k1 = t.stripe_indices.back();

  Plane out(img_w, img_h, 0.0);
  for (int y = 0; y < img_h; ++y) {
    double* row = out.row(y);
    for (int x = 0; x < img_w; ++x) {
      const StripeCoords c = rotate_coords(x, y, cos_t, sin_t, img_w, img_h);
      const auto lo = std::max(k0, static_cast<std::int64_t>(
                                       std::floor((c.v - p.phase_phi - reach) / P)));
      const auto hi = std::min(k1, static_cast<std::int64_t>(
                                       std::ceil((c.v - p.phase_phi + reach) / P)));
      double m = 0.0;
      for (std::int64_t k = lo; k <= hi && m < 1.0; ++k) {
        const auto& s = stripes[static_cast<std::size_t>(k - k0)];
        const double dv = c.v - s.center;
        const double u = s.cos_d * c.u + s.sin_d * dv;
        const double v = -s.sin_d * c.u + s.cos_d * dv;
        double top = s.half_width;
        double bot = -s.half_width;
        if (p.delta_edge > 0.0) {
          top += p.delta_edge * JitterTrace::eta_at(*s.eta_top, t.u_origin, u);
          bot += p.delta_edge * JitterTrace::eta_at(*s.eta_bot, t.u_origin, u);
        }
        m = std::max(m, detail::edge_ramp(std::min(top - v, v - bot), F));
      }
      row[x] = m;
    }
  }
  FlickerMask mask;
  mask.values = std::move(out);
  return mask;
}

/// Arithmetic mean of all mask values.
inline double mask_coverage(const FlickerMask& m) {
  const auto& v = m.values.values();
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace flickerband
