#pragma once

// Stripe-aligned coordinates, stripe centerlines, and the stochastic jitter
// realizations that parameterize one banding pattern.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "flickerband/rng.hpp"

namespace flickerband {

/// Full parameterization of one degradation realization. Lengths in pixels,
/// angles in radians.
struct BandingParams {
  double theta = 0.0;          ///< nominal stripe orientation, [-pi, pi)
  double width_w = 10.0;       ///< nominal stripe width
  double gap_g = 30.0;         ///< nominal inter-stripe gap
  double phase_phi = 0.0;      ///< normal-direction phase offset
  double sigma_theta = 0.0;    ///< per-stripe angle jitter std
  double delta_g = 0.0;        ///< spacing jitter amplitude, < gap_g
  double delta_w = 0.0;        ///< width jitter amplitude, < width_w
  double delta_edge = 0.0;     ///< edge meander amplitude
  double edge_corr_len = 32.0; ///< correlation length of the edge processes, >= 1
  double feather_px = 2.0;     ///< half-width of the boundary ramp
  double v_y = 0.5;            ///< luminance darkening factor, (0, 1]
  double noise_alpha = 0.0;    ///< signal-dependent noise strength
  double noise_sigma_r = 0.0;  ///< signal-independent noise std
  std::uint64_t seed = 0;

  double period() const noexcept { return width_w + gap_g; }

  friend bool operator==(const BandingParams&, const BandingParams&) = default;
};

class InvalidParams : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws InvalidParams naming the first violated constraint.
inline void validate(const BandingParams& p) {
  auto fail = [](const std::string& what) { throw InvalidParams("BandingParams: " + what); };
  const double fields[] = {p.theta,      p.width_w,       p.gap_g,      p.phase_phi,
                           p.sigma_theta, p.delta_g,      p.delta_w,    p.delta_edge,
                           p.edge_corr_len, p.feather_px, p.v_y,        p.noise_alpha,
                           p.noise_sigma_r};
  for (double f : fields)
    if (!std::isfinite(f)) fail("non-finite field");
  if (p.theta < -std::numbers::pi || p.theta >= std::numbers::pi) fail("theta outside [-pi, pi)");
  if (p.width_w <= 0.0) fail("width_w must be > 0");
  if (p.gap_g <= 0.0) fail("gap_g must be > 0");
  if (p.v_y <= 0.0 || p.v_y > 1.0) fail("v_y must lie in (0, 1]");
  if (p.sigma_theta < 0.0) fail("sigma_theta must be >= 0");
  if (p.delta_g < 0.0 || p.delta_g >= p.gap_g) fail("delta_g must lie in [0, gap_g)");
  if (p.delta_w < 0.0 || p.delta_w >= p.width_w) fail("delta_w must lie in [0, width_w)");
  if (p.delta_edge < 0.0) fail("delta_edge must be >= 0");
  if (p.edge_corr_len < 1.0) fail("edge_corr_len must be >= 1");
  if (p.feather_px < 0.0) fail("feather_px must be >= 0");
  if (p.noise_alpha < 0.0) fail("noise_alpha must be >= 0");
  if (p.noise_sigma_r < 0.0) fail("noise_sigma_r must be >= 0");
}

struct StripeCoords {
  double u;  ///< along the stripes
  double v;  ///< normal to the stripes
};

/// Rotates pixel (x, y) about the image center into the stripe frame.
constexpr StripeCoords rotate_coords(double x, double y, double cos_t, double sin_t,
                                     int img_w, int img_h) noexcept {
  const double dx = x - 0.5 * (img_w - 1);
  const double dy = y - 0.5 * (img_h - 1);
  return {cos_t * dx + sin_t * dy, -sin_t * dx + cos_t * dy};
}

inline StripeCoords rotate_coords(double x, double y, int img_w, int img_h, double theta) noexcept {
  return rotate_coords(x, y, std::cos(theta), std::sin(theta), img_w, img_h);
}

/// Gaussian white noise smoothed by a Gaussian kernel of std corr_len / 2.
/// The kernel has unit L2 norm, so every sample is marginally N(0, 1).
inline std::vector<double> lowpass_noise_1d(int length, double corr_len, Rng& rng) {
  if (length < 1) throw std::invalid_argument("lowpass_noise_1d: length must be >= 1");
  if (!(corr_len >= 1.0)) throw std::invalid_argument("lowpass_noise_1d: corr_len must be >= 1");

  const double sigma = corr_len / 2.0;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double norm2 = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double k = std::exp(-0.5 * (i * i) / (sigma * sigma));
    kernel[i + radius] = k;
    norm2 += k * k;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& k : kernel) k *= inv;

  std::vector<double> white(static_cast<std::size_t>(length + 2 * radius));
  for (double& w : white) w = rng.normal();

  std::vector<double> out(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < kernel.size(); ++j) acc += kernel[j] * white[i + j];
    out[i] = acc;
  }
  return out;
}

/// Realized per-stripe random draws. Stripe indices are contiguous.
struct JitterTrace {
  std::vector<std::int64_t> stripe_indices;
  std::vector<double> angle_offsets;
  std::vector<double> spacing_offsets;
  std::vector<double> width_offsets;
  std::vector<std::vector<double>> eta_top;
  std::vector<std::vector<double>> eta_bot;
  /// u coordinate of eta sample 0; sample i sits at u_origin + i.
  double u_origin = 0.0;

  std::size_t size() const noexcept { return stripe_indices.size(); }

  /// Position of stripe k in the lists, or -1 when absent.
  std::ptrdiff_t find(std::int64_t k) const noexcept {
    if (stripe_indices.empty()) return -1;
    const std::int64_t i = k - stripe_indices.front();
    if (i < 0 || i >= static_cast<std::int64_t>(stripe_indices.size())) return -1;
    return static_cast<std::ptrdiff_t>(i);
  }

  /// Linearly interpolated edge process at u; clamps beyond the sampled range.
  static double eta_at(const std::vector<double>& eta, double origin, double u) noexcept {
    if (eta.empty()) return 0.0;
    const double t = std::clamp(u - origin, 0.0, static_cast<double>(eta.size() - 1));
    const auto i = static_cast<std::size_t>(t);
    if (i + 1 >= eta.size()) return eta.back();
    const double f = t - static_cast<double>(i);
    return eta[i] + f * (eta[i + 1] - eta[i]);
  }

  friend bool operator==(const JitterTrace&, const JitterTrace&) = default;
};

/// Throws std::invalid_argument if list lengths disagree or indices are not contiguous.
inline void validate(const JitterTrace& t) {
  const std::size_t n = t.stripe_indices.size();
  if (t.angle_offsets.size() != n || t.spacing_offsets.size() != n ||
      t.width_offsets.size() != n || t.eta_top.size() != n || t.eta_bot.size() != n)
    throw std::invalid_argument("JitterTrace: list lengths disagree");
  for (std::size_t i = 1; i < n; ++i)
    if (t.stripe_indices[i] != t.stripe_indices[i - 1] + 1)
      throw std::invalid_argument("JitterTrace: stripe indices not contiguous");
}

/// Stripe range and edge-process length needed to render an image.
struct StripeCoverage {
  std::int64_t k_first = 0;
  int n_stripes = 0;
  int u_len = 0;
  double u_origin = 0.0;
};

/// Upper bound on how far stripe material can reach from a nominal
/// centerline kP + phi, in the nominal v direction. Angle and edge draws are
/// Gaussian, so the bound covers 6 standard deviations.
inline double stripe_reach(const BandingParams& p, double half_diag) {
  const double tilt = std::min(6.0 * p.sigma_theta, std::numbers::pi / 4.0);
  return ((p.width_w + p.delta_w) / 2.0 + 6.0 * p.delta_edge + p.feather_px +
          half_diag * std::sin(tilt)) / std::cos(tilt) +
         p.delta_g + 1.0;
}

inline StripeCoverage stripe_coverage(const BandingParams& p, int img_w, int img_h) {
  const double P = p.period();
  const double half_diag = 0.5 * std::hypot(img_w - 1.0, img_h - 1.0);
  const double rv = 0.5 * (std::abs(std::sin(p.theta)) * (img_w - 1) +
                           std::abs(std::cos(p.theta)) * (img_h - 1));
  const double reach = stripe_reach(p, half_diag);
  StripeCoverage c;
  c.k_first = static_cast<std::int64_t>(std::floor((-rv - reach - p.phase_phi) / P)) - 1;
  const auto k_last = static_cast<std::int64_t>(std::ceil((rv + reach - p.phase_phi) / P)) + 1;
  c.n_stripes = static_cast<int>(k_last - c.k_first + 1);
  const double u_half = std::ceil(half_diag + reach);
  c.u_len = 2 * static_cast<int>(u_half) + 1;
  c.u_origin = -u_half;
  return c;
}

/// Draws per-stripe jitter for stripes k_first .. k_first + n_stripes - 1.
/// Each stripe uses its own child stream of `rng`, so stripe k's draws depend
/// only on (rng, k) unless a non-inversion resample consulted stripe k - 1.
inline JitterTrace sample_jitter(const BandingParams& p, const Rng& rng, std::int64_t k_first,
                                 int n_stripes, int u_len, double u_origin = 0.0) {
  validate(p);
  if (n_stripes < 1) throw std::invalid_argument("sample_jitter: n_stripes must be >= 1");
  if (u_len < 1) throw std::invalid_argument("sample_jitter: u_len must be >= 1");
  constexpr int kMaxAttempts = 100;

  JitterTrace t;
  t.u_origin = u_origin;
  const auto n = static_cast<std::size_t>(n_stripes);
  t.stripe_indices.reserve(n);
  t.angle_offsets.reserve(n);
  t.spacing_offsets.reserve(n);
  t.width_offsets.reserve(n);
  t.eta_top.reserve(n);
  t.eta_bot.reserve(n);

  for (int i = 0; i < n_stripes; ++i) {
    const std::int64_t k = k_first + i;
    Rng stripe = rng.split(static_cast<std::uint64_t>(k));
    Rng draws = stripe.split(0);

    const double dtheta = p.sigma_theta * draws.normal();
    double dg = 0.0, dw = 0.0;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
      dg = draws.uniform(-p.delta_g, p.delta_g);
      dw = draws.uniform(-p.delta_w, p.delta_w);
      ok = p.width_w + dw > 0.0;
      if (ok && i > 0) {
        // Realized gap to the previous stripe must stay positive.
        const double gap = p.gap_g + dg - t.spacing_offsets.back() -
                           0.5 * (dw + t.width_offsets.back());
        ok = gap > 0.0;
      }
    }
    if (!ok)
      throw InvalidParams("sample_jitter: no non-inverting draw for stripe " + std::to_string(k) +
                          " after 100 attempts");

    Rng top = stripe.split(1);
    Rng bot = stripe.split(2);
    t.stripe_indices.push_back(k);
    t.angle_offsets.push_back(dtheta);
    t.spacing_offsets.push_back(dg);
    t.width_offsets.push_back(dw);
    t.eta_top.push_back(lowpass_noise_1d(u_len, p.edge_corr_len, top));
    t.eta_bot.push_back(lowpass_noise_1d(u_len, p.edge_corr_len, bot));
  }
  return t;
}

/// Jitter for every stripe that can touch an img_w x img_h image, seeded from params.seed.
inline JitterTrace sample_jitter_for_image(const BandingParams& p, int img_w, int img_h) {
  validate(p);
  if (img_w < 1 || img_h < 1) throw std::invalid_argument("sample_jitter: zero-area image");
  const StripeCoverage c = stripe_coverage(p, img_w, img_h);
  return sample_jitter(p, Rng(p.seed).split(0x6a17e5), c.k_first, c.n_stripes, c.u_len,
                       c.u_origin);
}

struct StripeLine {
  std::int64_t k;
  double center_v;
  double width;

  friend bool operator==(const StripeLine&, const StripeLine&) = default;
};

/// Centerlines of the stripes whose realized extent [c - w_k/2, c + w_k/2]
/// intersects [v_min, v_max], sorted by k.
inline std::vector<StripeLine> stripe_centerlines(const BandingParams& p, const JitterTrace& t,
                                                  double v_min, double v_max) {
  if (!(v_min < v_max)) throw std::invalid_argument("stripe_centerlines: v_min must be < v_max");
  validate(t);
  const double P = p.period();
  const auto k_lo = static_cast<std::int64_t>(std::ceil((v_min - P - p.phase_phi) / P));
  const auto k_hi = static_cast<std::int64_t>(std::floor((v_max + P - p.phase_phi) / P));

  std::vector<StripeLine> out;
  for (std::int64_t k = k_lo; k <= k_hi; ++k) {
    const std::ptrdiff_t i = t.find(k);
    if (i < 0) throw std::out_of_range("stripe_centerlines: trace lacks stripe " + std::to_string(k));
    const double c = static_cast<double>(k) * P + p.phase_phi + t.spacing_offsets[i];
    const double w = p.width_w + t.width_offsets[i];
    if (c + 0.5 * w >= v_min && c - 0.5 * w <= v_max) out.push_back({k, c, w});
  }
  return out;
}

}  // namespace flickerband
