#pragma once

// Banding-aware masked losses and standard full-reference metrics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "flickerband/image.hpp"
#include "flickerband/mask.hpp"

namespace flickerband {

/// Dense B x C x H x W tensor, row-major in that order.
struct Tensor4 {
  int b = 0, c = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(int b_, int c_, int h_, int w_, double fill = 0.0) : b(b_), c(c_), h(h_), w(w_) {
    if (b < 0 || c < 0 || h < 0 || w < 0) throw std::invalid_argument("Tensor4: negative shape");
    data.assign(static_cast<std::size_t>(b) * c * h * w, fill);
  }

  std::size_t index(int bi, int ci, int y, int x) const noexcept {
    return ((static_cast<std::size_t>(bi) * c + ci) * h + y) * w + x;
  }
  double& operator()(int bi, int ci, int y, int x) noexcept { return data[index(bi, ci, y, x)]; }
  double operator()(int bi, int ci, int y, int x) const noexcept { return data[index(bi, ci, y, x)]; }

  bool same_shape(const Tensor4& o) const noexcept {
    return b == o.b && c == o.c && h == o.h && w == o.w;
  }
};

inline Tensor4 to_tensor(const RgbImage& img) {
  Tensor4 t(1, 3, img.height(), img.width());
  for (int ch = 0; ch < 3; ++ch)
    std::copy(img.plane(ch).values().begin(), img.plane(ch).values().end(),
              t.data.begin() + static_cast<std::ptrdiff_t>(t.index(0, ch, 0, 0)));
  return t;
}

inline Tensor4 to_tensor(const FlickerMask& m) {
  Tensor4 t(1, 1, m.height(), m.width());
  std::copy(m.values.values().begin(), m.values.values().end(), t.data.begin());
  return t;
}

inline Tensor4 complement(const Tensor4& mask) {
  Tensor4 out = mask;
  for (double& v : out.data) v = 1.0 - v;
  return out;
}

struct MaskedLossWeights {
  double lambda_banding = 0.8;
  double lambda_pixel = 1.0;
  double lambda_perceptual = 2.0;
  double epsilon = 1e-8;
};

inline void validate(const MaskedLossWeights& w) {
  if (!(w.lambda_banding >= 0.0 && w.lambda_banding <= 1.0))
    throw std::invalid_argument("lambda_banding must lie in [0, 1]");
  if (!(w.lambda_pixel >= 0.0)) throw std::invalid_argument("lambda_pixel must be >= 0");
  if (!(w.lambda_perceptual >= 0.0)) throw std::invalid_argument("lambda_perceptual must be >= 0");
  if (!(w.epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
}

/// sum(field * mask~) / (sum(mask~) + eps), mask~ = mask broadcast over channels.
inline double masked_mean(const Tensor4& field, const Tensor4& mask, double epsilon = 1e-8) {
  if (mask.b != field.b || mask.h != field.h || mask.w != field.w || mask.c != 1)
    throw std::invalid_argument("masked_mean: mask must be B x 1 x H x W matching the field");
  double num = 0.0, den = 0.0;
  for (int bi = 0; bi < field.b; ++bi)
    for (int ci = 0; ci < field.c; ++ci)
      for (int y = 0; y < field.h; ++y)
        for (int x = 0; x < field.w; ++x) {
          const double m = mask(bi, 0, y, x);
          num += field(bi, ci, y, x) * m;
          den += m;
        }
  return num / (den + epsilon);
}

/// Band and background terms of a masked loss, before weighting.
struct MaskedTerms {
  double band = 0.0;
  double background = 0.0;

  double combine(double lambda_banding) const noexcept {
    return lambda_banding * band + (1.0 - lambda_banding) * background;
  }
};

inline MaskedTerms masked_terms(const Tensor4& field, const Tensor4& mask, double epsilon) {
  return {masked_mean(field, mask, epsilon), masked_mean(field, complement(mask), epsilon)};
}

inline Tensor4 squared_error(const Tensor4& pred, const Tensor4& gt) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("prediction and ground truth shapes differ");
  Tensor4 out = pred;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double d = pred.data[i] - gt.data[i];
    out.data[i] = d * d;
  }
  return out;
}

inline MaskedTerms masked_pixel_terms(const Tensor4& pred, const Tensor4& gt, const Tensor4& mask,
                                      const MaskedLossWeights& w) {
  return masked_terms(squared_error(pred, gt), mask, w.epsilon);
}

inline double masked_pixel_loss(const Tensor4& pred, const Tensor4& gt, const Tensor4& mask,
                                const MaskedLossWeights& w) {
  validate(w);
  return masked_pixel_terms(pred, gt, mask, w).combine(w.lambda_banding);
}

namespace detail {

/// Overlap-weighted 1D resampling matrix from n_in cells onto n_out cells.
inline std::vector<std::vector<std::pair<int, double>>> area_weights(int n_in, int n_out) {
  std::vector<std::vector<std::pair<int, double>>> wts(static_cast<std::size_t>(n_out));
  const double scale = static_cast<double>(n_in) / n_out;
  for (int o = 0; o < n_out; ++o) {
    const double lo = o * scale, hi = (o + 1) * scale;
    for (int i = static_cast<int>(std::floor(lo)); i < n_in && i < hi; ++i) {
      const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
      if (overlap > 0.0) wts[o].push_back({i, overlap / scale});
    }
  }
  return wts;
}

}  // namespace detail

/// Area-averaging resample of every (b, c) slice to out_h x out_w.
inline Tensor4 area_resample(const Tensor4& t, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("area_resample: empty target");
  if (t.h == out_h && t.w == out_w) return t;
  const auto wy = detail::area_weights(t.h, out_h);
  const auto wx = detail::area_weights(t.w, out_w);
  Tensor4 out(t.b, t.c, out_h, out_w);
  for (int bi = 0; bi < t.b; ++bi)
    for (int ci = 0; ci < t.c; ++ci)
      for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
          double acc = 0.0;
          for (auto [iy, fy] : wy[y])
            for (auto [ix, fx] : wx[x]) acc += fy * fx * t(bi, ci, iy, ix);
          out(bi, ci, y, x) = acc;
        }
  return out;
}

inline MaskedTerms masked_perceptual_terms(const Tensor4& dist_map, const Tensor4& mask,
                                           const MaskedLossWeights& w) {
  if (dist_map.c != 1) throw std::invalid_argument("distance map must have one channel");
  if (dist_map.b != mask.b) throw std::invalid_argument("distance map and mask batch sizes differ");
  for (double d : dist_map.data)
    if (d < 0.0) throw std::invalid_argument("distance map holds negative values");
  const Tensor4 m = area_resample(mask, dist_map.h, dist_map.w);
  return masked_terms(dist_map, m, w.epsilon);
}

/// Mask is area-averaged down to the distance map's resolution first.
inline double masked_perceptual_loss(const Tensor4& dist_map, const Tensor4& mask,
                                     const MaskedLossWeights& w) {
  validate(w);
  return masked_perceptual_terms(dist_map, mask, w).combine(w.lambda_banding);
}

/// Produces a B x 1 x h x w per-pixel perceptual distance map for (pred, gt).
using DistanceProvider = std::function<Tensor4(const Tensor4& pred, const Tensor4& gt)>;

inline constexpr int kProxyDownsample = 4;

/// Gradient-magnitude distance: per channel squared difference of central
/// difference gradient magnitudes, averaged over channels, then area-averaged
/// 4x down. Insensitive to DC offsets by construction.
inline Tensor4 perceptual_proxy(const Tensor4& pred, const Tensor4& gt) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("perceptual_proxy: shapes differ");
  auto grad_mag = [](const Tensor4& t, int bi, int ci, int y, int x) {
    const int xl = std::max(x - 1, 0), xr = std::min(x + 1, t.w - 1);
    const int yu = std::max(y - 1, 0), yd = std::min(y + 1, t.h - 1);
    const double gx = (t(bi, ci, y, xr) - t(bi, ci, y, xl)) / std::max(xr - xl, 1);
    const double gy = (t(bi, ci, yd, x) - t(bi, ci, yu, x)) / std::max(yd - yu, 1);
    return std::sqrt(gx * gx + gy * gy);
  };
  Tensor4 full(pred.b, 1, pred.h, pred.w);
  for (int bi = 0; bi < pred.b; ++bi)
    for (int y = 0; y < pred.h; ++y)
      for (int x = 0; x < pred.w; ++x) {
        double acc = 0.0;
        for (int ci = 0; ci < pred.c; ++ci) {
          const double d = grad_mag(pred, bi, ci, y, x) - grad_mag(gt, bi, ci, y, x);
          acc += d * d;
        }
        full(bi, 0, y, x) = pred.c > 0 ? acc / pred.c : 0.0;
      }
  return area_resample(full, std::max(1, pred.h / kProxyDownsample),
                       std::max(1, pred.w / kProxyDownsample));
}

inline DistanceProvider gradient_proxy_provider() { return perceptual_proxy; }

struct MergedLoss {
  MaskedTerms pixel;
  MaskedTerms perceptual;
  double pixel_loss = 0.0;
  double perceptual_loss = 0.0;
  double total = 0.0;
};

inline MergedLoss merged_loss_terms(const Tensor4& pred, const Tensor4& gt, const Tensor4& mask,
                                    const DistanceProvider& dist, const MaskedLossWeights& w) {
  validate(w);
  MergedLoss out;
  out.pixel = masked_pixel_terms(pred, gt, mask, w);
  out.perceptual = masked_perceptual_terms(dist(pred, gt), mask, w);
  out.pixel_loss = out.pixel.combine(w.lambda_banding);
  out.perceptual_loss = out.perceptual.combine(w.lambda_banding);
  out.total = w.lambda_pixel * out.pixel_loss + w.lambda_perceptual * out.perceptual_loss;
  return out;
}

/// lambda_pixel * masked pixel loss + lambda_perceptual * masked perceptual loss.
inline double merged_loss(const Tensor4& pred, const Tensor4& gt, const Tensor4& mask,
                          const DistanceProvider& dist, const MaskedLossWeights& w) {
  return merged_loss_terms(pred, gt, mask, dist, w).total;
}

/// Reported in place of +infinity for identical inputs.
inline constexpr double kPsnrCap = 100.0;

/// Peak 1.0, MSE over all channels; capped at kPsnrCap.
inline double psnr(const Tensor4& pred, const Tensor4& gt) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("psnr: shapes differ");
  if (pred.data.empty()) throw std::invalid_argument("psnr: empty input");
  double se = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - gt.data[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(pred.data.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

/// Mean SSIM over channels with an 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, L = 1, valid-region statistics.
inline double ssim(const Tensor4& pred, const Tensor4& gt) {
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  if (!pred.same_shape(gt)) throw std::invalid_argument("ssim: shapes differ");
  if (pred.h < kWin || pred.w < kWin) throw std::invalid_argument("ssim: image smaller than 11x11");

  double g[kWin], gsum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    g[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    gsum += g[i];
  }
  for (double& v : g) v /= gsum;

  const int oh = pred.h - kWin + 1, ow = pred.w - kWin + 1;
  // Separable filtering of the five moment images: horizontal then vertical.
  auto filter = [&](const std::vector<double>& src, int h, int w) {
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow), out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        double a = 0.0;
        for (int k = 0; k < kWin; ++k) a += g[k] * src[static_cast<std::size_t>(y) * w + x + k];
        tmp[static_cast<std::size_t>(y) * ow + x] = a;
      }
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double a = 0.0;
        for (int k = 0; k < kWin; ++k) a += g[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
        out[static_cast<std::size_t>(y) * ow + x] = a;
      }
    return out;
  };

  double total = 0.0;
  int slices = 0;
  const std::size_t n = static_cast<std::size_t>(pred.h) * pred.w;
  for (int bi = 0; bi < pred.b; ++bi)
    for (int ci = 0; ci < pred.c; ++ci) {
      const std::size_t base = pred.index(bi, ci, 0, 0);
      std::vector<double> a(n), b(n), aa(n), bb(n), ab(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = pred.data[base + i];
        b[i] = gt.data[base + i];
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
      }
      const auto mu_a = filter(a, pred.h, pred.w), mu_b = filter(b, pred.h, pred.w);
      const auto s_aa = filter(aa, pred.h, pred.w), s_bb = filter(bb, pred.h, pred.w);
      const auto s_ab = filter(ab, pred.h, pred.w);
      double acc = 0.0;
      for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double va = s_aa[i] - ma * ma, vb = s_bb[i] - mb * mb, cov = s_ab[i] - ma * mb;
        acc += ((2 * ma * mb + C1) * (2 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
      }
      total += acc / static_cast<double>(mu_a.size());
      ++slices;
    }
  return slices ? total / slices : 1.0;
}

}  // namespace flickerband
