#pragma once

// Spectral recovery of banding angle, period, and duty cycle.
//
// The luminance plane is mean-removed and Hann-windowed. The strongest
// spectral line (relative to the median magnitude of its frequency ring) is
// taken as the banding fundamental, refined to sub-bin precision on the
// continuous DTFT, and the duty cycle is fit from the phase-coherent ratios
// of the second and third harmonics to a feathered rectangular wave.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "flickerband/colorspace.hpp"
#include "flickerband/fft.hpp"
#include "flickerband/image.hpp"

namespace flickerband {

struct BandingEstimate {
  double theta_hat = 0.0;   ///< radians, folded into [-pi/2, pi/2)
  double period_hat = 0.0;  ///< pixels
  double duty_hat = 0.5;    ///< dark fraction of the period, (0, 1)
  double confidence = 0.0;  ///< [0, 1]; 0.5 at the acceptance threshold
  double prominence = 0.0;  ///< peak magnitude over spectral background

  double width_hat() const noexcept { return duty_hat * period_hat; }
  double gap_hat() const noexcept { return period_hat - width_hat(); }
};

class NoBandingDetected : public std::runtime_error {
 public:
  explicit NoBandingDetected(double best_prominence)
      : std::runtime_error("no banding detected"), prominence(best_prominence) {}
  double prominence;
};

struct EstimatorOptions {
  double peak_threshold = 6.0;  ///< minimum prominence for acceptance
  bool hann_window = true;
  double min_cycles = 2.5;  ///< near-DC exclusion, in cycles across the shorter side
};

namespace detail {

struct Freq {
  double fx, fy;  ///< cycles per pixel
  double norm() const noexcept { return std::hypot(fx, fy); }
  Freq scaled(double s) const noexcept { return {fx * s, fy * s}; }
};

/// Windowed, mean-removed luminance with continuous-frequency DTFT access.
class WindowedField {
 public:
  WindowedField(const Plane& y, bool hann) : w_(y.width()), h_(y.height()), data_(y.values()) {
    double mean = 0.0;
    for (double v : data_) mean += v;
    mean /= static_cast<double>(data_.size());
    std::vector<double> wx(w_, 1.0), wy(h_, 1.0);
    if (hann) {
      for (int x = 0; x < w_; ++x) wx[x] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * x / (w_ - 1));
      for (int y = 0; y < h_; ++y) wy[y] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * y / (h_ - 1));
    }
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) {
        double& v = data_[static_cast<std::size_t>(y) * w_ + x];
        v = (v - mean) * wx[x] * wy[y];
      }
  }

  int width() const noexcept { return w_; }
  int height() const noexcept { return h_; }
  const std::vector<double>& data() const noexcept { return data_; }

  /// DTFT on the grid fx_list x fy_list; result[j * nx + i] for (fx_i, fy_j).
  std::vector<Complex> dtft(const std::vector<double>& fx_list,
                            const std::vector<double>& fy_list) const {
    const std::size_t nx = fx_list.size(), ny = fy_list.size();
    std::vector<Complex> rows(nx * static_cast<std::size_t>(h_));
    const auto w = static_cast<std::size_t>(w_);
    std::vector<double> cx(nx * w), sx(nx * w);
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t x = 0; x < w; ++x) {
        const double a = 2.0 * std::numbers::pi * fx_list[i] * static_cast<double>(x);
        cx[i * w + x] = std::cos(a);
        sx[i * w + x] = std::sin(a);
      }
    for (int y = 0; y < h_; ++y) {
      const double* r = data_.data() + static_cast<std::size_t>(y) * w;
      for (std::size_t i = 0; i < nx; ++i) {
        const double* c = cx.data() + i * w;
        const double* sn = sx.data() + i * w;
        double re = 0.0, im = 0.0;
        for (std::size_t x = 0; x < w; ++x) {
          re += r[x] * c[x];
          im -= r[x] * sn[x];
        }
        rows[i * h_ + y] = {re, im};
      }
    }
    std::vector<Complex> out(nx * ny);
    for (std::size_t j = 0; j < ny; ++j)
      for (int y = 0; y < h_; ++y) {
        const double a = 2.0 * std::numbers::pi * fy_list[j] * y;
        const double c = std::cos(a), sn = std::sin(a);
        for (std::size_t i = 0; i < nx; ++i) {
          const Complex v = rows[i * h_ + y];
          out[j * nx + i] += Complex(v.real() * c + v.imag() * sn, v.imag() * c - v.real() * sn);
        }
      }
    return out;
  }

  Complex dtft(Freq f) const { return dtft({f.fx}, {f.fy})[0]; }

  /// Pattern search for the local maximum of |DTFT| starting from f, confined
  /// to a square of half-width `reach` around the start.
  Freq refine_peak(Freq f, double step, double reach) const {
    const Freq start = f;
    const double min_step = step / 256.0;
    for (int iter = 0; iter < 64 && step > min_step; ++iter) {
      const auto g = dtft({f.fx - step, f.fx, f.fx + step}, {f.fy - step, f.fy, f.fy + step});
      std::size_t best = 4;
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double cx = f.fx + step * (static_cast<double>(k % 3) - 1.0);
        const double cy = f.fy + step * (static_cast<double>(k / 3) - 1.0);
        if (std::abs(cx - start.fx) > reach || std::abs(cy - start.fy) > reach) continue;
        if (std::abs(g[k]) > std::abs(g[best])) best = k;
      }
      if (best == 4) {
        step *= 0.5;
      } else {
        f.fx += step * (static_cast<double>(best % 3) - 1.0);
        f.fy += step * (static_cast<double>(best / 3) - 1.0);
      }
    }
    return f;
  }

 private:
  int w_, h_;
  std::vector<double> data_;
};

/// Padded FFT magnitudes with per-ring medians as the spectral background.
class Spectrum {
 public:
  Spectrum(const WindowedField& field, double min_cycles)
      : nx_(next_pow2(field.width())), ny_(next_pow2(field.height())) {
    std::vector<Complex> grid(nx_ * ny_);
    for (int y = 0; y < field.height(); ++y)
      for (int x = 0; x < field.width(); ++x)
        grid[static_cast<std::size_t>(y) * nx_ + x] = field.data()[static_cast<std::size_t>(y) * field.width() + x];
    fft2_inplace(grid, nx_, ny_);
    mag_.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) mag_[i] = std::abs(grid[i]);

    ring_scale_ = static_cast<double>(std::min(nx_, ny_));
    min_radius_ = min_cycles / std::min(field.width(), field.height());
    const auto n_rings = static_cast<std::size_t>(ring_scale_ * std::sqrt(0.5)) + 2;
    median_.assign(n_rings, 0.0);
    std::vector<std::vector<double>> rings(n_rings);
    for (std::size_t ky = 0; ky < ny_; ++ky)
      for (std::size_t kx = 0; kx < nx_; ++kx) {
        const Freq f = freq(kx, ky);
        if (!in_half_plane(f)) continue;
        rings[ring(f)].push_back(mag_[ky * nx_ + kx]);
      }
    for (std::size_t r = 0; r < n_rings; ++r) {
      auto& v = rings[r];
      if (v.empty()) continue;
      std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
      median_[r] = v[v.size() / 2];
    }
  }

  std::size_t nx() const noexcept { return nx_; }
  std::size_t ny() const noexcept { return ny_; }

  Freq freq(std::size_t kx, std::size_t ky) const noexcept {
    const auto sx = static_cast<double>(kx < nx_ / 2 ? static_cast<double>(kx) : static_cast<double>(kx) - nx_);
    const auto sy = static_cast<double>(ky < ny_ / 2 ? static_cast<double>(ky) : static_cast<double>(ky) - ny_);
    return {sx / nx_, sy / ny_};
  }

  static bool in_half_plane(Freq f) noexcept { return f.fy > 0.0 || (f.fy == 0.0 && f.fx > 0.0); }

  bool usable(Freq f) const noexcept {
    const double r = f.norm();
    return r >= min_radius_ && std::abs(f.fx) < 0.5 && std::abs(f.fy) < 0.5;
  }

  std::size_t ring(Freq f) const noexcept {
    return std::min(static_cast<std::size_t>(std::lround(f.norm() * ring_scale_)), median_.size() - 1);
  }

  double background(Freq f) const noexcept { return median_[ring(f)]; }

  double min_radius() const noexcept { return min_radius_; }

  /// Width of one bin along the coarser axis, in cycles per pixel.
  double bin() const noexcept { return 1.0 / static_cast<double>(std::min(nx_, ny_)); }

  double magnitude(std::size_t kx, std::size_t ky) const noexcept {
    return mag_[(ky % ny_) * nx_ + (kx % nx_)];
  }

  /// Magnitude at the grid bin nearest to f.
  double magnitude_near(Freq f) const noexcept {
    const auto kx = static_cast<std::int64_t>(std::lround(f.fx * nx_));
    const auto ky = static_cast<std::int64_t>(std::lround(f.fy * ny_));
    const auto wrap = [](std::int64_t k, std::size_t n) {
      const auto m = static_cast<std::int64_t>(n);
      return static_cast<std::size_t>(((k % m) + m) % m);
    };
    return mag_[wrap(ky, ny_) * nx_ + wrap(kx, nx_)];
  }

  /// Largest grid magnitude within one bin of f.
  double neighborhood_max(Freq f) const noexcept {
    double m = 0.0;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        m = std::max(m, magnitude_near({f.fx + dx / static_cast<double>(nx_), f.fy + dy / static_cast<double>(ny_)}));
    return m;
  }

  bool local_max(std::size_t kx, std::size_t ky) const noexcept {
    const double m = magnitude(kx, ky);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (!dx && !dy) continue;
        if (magnitude(kx + nx_ + dx, ky + ny_ + dy) > m) return false;
      }
    return true;
  }

 private:
  std::size_t nx_, ny_;
  std::vector<double> mag_;
  std::vector<double> median_;
  double ring_scale_ = 1.0;
  double min_radius_ = 0.0;
};

/// Magnitude over background, where background also covers radial streaks:
/// an isolated line has little energy along its own direction at nearby
/// radii, a straight edge or its ripples do. The radial level is the median
/// over a window around the peak radius, skipping the main lobe.
inline double line_score(const Spectrum& s, Freq f, double magnitude) {
  const double r = f.norm();
  if (r <= 0.0) return 0.0;
  const double bin = s.bin();
  const double lobe = 3.0 * bin;
  const double span = 0.45 * r;
  std::vector<double> radial;
  for (double t = std::max(r - span, s.min_radius()); t <= r + span; t += bin) {
    if (std::abs(t - r) < lobe) continue;
    const Freq g = f.scaled(t / r);
    if (!s.usable(g)) continue;
    radial.push_back(s.magnitude_near(g));
  }
  double streak = 0.0;
  if (!radial.empty()) {
    const auto mid = radial.begin() + static_cast<std::ptrdiff_t>(radial.size() / 2);
    std::nth_element(radial.begin(), mid, radial.end());
    streak = *mid;
  }
  const double bg = std::max(s.background(f), streak);
  return bg > 0.0 ? magnitude / bg : 0.0;
}

inline double sinc(double x) noexcept {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
}

/// Signed harmonic ratios c2/c1 and c3/c1 of a rectangular wave of duty d
/// convolved with a box of width b periods.
inline double model_ratio(int n, double d, double b) noexcept {
  const double s1 = std::sin(std::numbers::pi * d);
  return std::sin(std::numbers::pi * n * d) / (n * s1) * sinc(n * b) / sinc(b);
}

/// Least-squares fit of (duty, box width) to measured signed ratios.
inline double fit_duty(double rho2, std::optional<double> rho3) {
  if (!rho3) return std::acos(std::clamp(rho2, -1.0, 1.0)) / std::numbers::pi;
  double best_d = 0.5, best_err = 1e300;
  for (int i = 5; i <= 995; ++i) {
    const double d = i * 1e-3;
    const double b_max = std::min({d, 1.0 - d, 0.45});
    for (int j = 0; j * 5e-3 <= b_max; ++j) {
      const double b = j * 5e-3;
      const double e2 = model_ratio(2, d, b) - rho2;
      const double e3 = model_ratio(3, d, b) - *rho3;
      const double err = e2 * e2 + e3 * e3;
      if (err < best_err) {
        best_err = err;
        best_d = d;
      }
    }
  }
  return best_d;
}

inline double fold_half_turn(double theta) noexcept {
  constexpr double pi = std::numbers::pi;
  while (theta >= pi / 2) theta -= pi;
  while (theta < -pi / 2) theta += pi;
  return theta;
}

}  // namespace detail

/// Throws NoBandingDetected when no spectral line beats options.peak_threshold.
inline BandingEstimate estimate_banding(const RgbImage& lq, const EstimatorOptions& opt = {}) {
  using detail::Freq;
  if (lq.width() < 64 || lq.height() < 64)
    throw std::invalid_argument("estimate_banding: image must be at least 64x64");

  const Plane luma = rgb_to_ycc(lq).c0;
  const detail::WindowedField field(luma, opt.hann_window);
  const detail::Spectrum spec(field, opt.min_cycles);

  struct Candidate {
    std::size_t kx, ky;
    double prominence;
  };
  std::vector<Candidate> cands;
  for (std::size_t ky = 0; ky < spec.ny(); ++ky)
    for (std::size_t kx = 0; kx < spec.nx(); ++kx) {
      const Freq f = spec.freq(kx, ky);
      if (!detail::Spectrum::in_half_plane(f) || !spec.usable(f)) continue;
      const double bg = spec.background(f);
      if (bg <= 0.0) continue;
      const double p = spec.magnitude(kx, ky) / bg;
      if (p < opt.peak_threshold || !spec.local_max(kx, ky)) continue;
      cands.push_back({kx, ky, p});
    }

  // Among lines that clear the threshold, the fundamental is the strongest.
  double best_score = 0.0, best_mag = 0.0, top_score = 0.0;
  std::optional<Freq> best;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const Freq f = spec.freq(cands[i].kx, cands[i].ky);
    const double mag = spec.magnitude(cands[i].kx, cands[i].ky);
    const double score = detail::line_score(spec, f, mag);
    top_score = std::max(top_score, score);
    if (score >= opt.peak_threshold && mag > best_mag) {
      best_mag = mag;
      best_score = score;
      best = f;
    }
  }
  if (!best) throw NoBandingDetected(top_score);

  const double bin = 1.0 / static_cast<double>(std::max(spec.nx(), spec.ny()));
  Freq fund = field.refine_peak(*best, 0.5 * bin, bin);
  double fund_mag = std::abs(field.dtft(fund));

  // The strongest line can be a harmonic when the duty cycle is small.
  for (int m = 4; m >= 2; --m) {
    Freq sub = fund.scaled(1.0 / m);
    if (!spec.usable(sub) || spec.neighborhood_max(sub) < 0.1 * fund_mag) continue;
    sub = field.refine_peak(sub, 0.25 * bin, bin);
    const double mag = std::abs(field.dtft(sub));
    if (mag >= 0.2 * fund_mag && detail::line_score(spec, sub, mag) >= opt.peak_threshold) {
      fund = sub;
      fund_mag = mag;
      best_score = detail::line_score(spec, sub, mag);
      break;
    }
  }

  BandingEstimate est;
  est.prominence = best_score;
  est.confidence = best_score / (best_score + opt.peak_threshold);
  est.period_hat = 1.0 / fund.norm();
  // Stripe normal is (-sin theta, cos theta).
  est.theta_hat = detail::fold_half_turn(std::atan2(-fund.fx, fund.fy));

  const Complex f1 = field.dtft(fund);
  const double a1 = std::abs(f1);
  const double nyquist = 0.5;
  if (2.0 * std::max(std::abs(fund.fx), std::abs(fund.fy)) < nyquist && a1 > 0.0) {
    const Complex f2 = field.dtft(fund.scaled(2.0));
    const Complex c1 = std::conj(f1);
    const double rho2 = -std::real(f2 * c1 * c1) / (a1 * a1 * a1);
    std::optional<double> rho3;
    if (3.0 * std::max(std::abs(fund.fx), std::abs(fund.fy)) < nyquist) {
      const Complex f3 = field.dtft(fund.scaled(3.0));
      rho3 = std::real(f3 * c1 * c1 * c1) / (a1 * a1 * a1 * a1);
    }
    est.duty_hat = std::clamp(detail::fit_duty(rho2, rho3), 1e-3, 1.0 - 1e-3);
  }
  return est;
}

/// Non-throwing variant.
inline std::optional<BandingEstimate> try_estimate_banding(const RgbImage& lq,
                                                           const EstimatorOptions& opt = {}) {
  try {
    return estimate_banding(lq, opt);
  } catch (const NoBandingDetected&) {
    return std::nullopt;
  }
}

}  // namespace flickerband
