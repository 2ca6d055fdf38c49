#pragma once

// Planar floating-point images.

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace flickerband {

/// Row-major H x W field of doubles.
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, double fill = 0.0)
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw std::invalid_argument("Plane: negative dimensions");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
  double operator()(int x, int y) const noexcept { return data_[index(x, y)]; }

  double* row(int y) noexcept { return data_.data() + index(0, y); }
  const double* row(int y) const noexcept { return data_.data() + index(0, y); }

  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool same_shape(const Plane& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Three planes sharing one shape. Tag distinguishes RGB from YCbCr layout.
template <typename Tag>
struct ThreePlane {
  Plane c0, c1, c2;

  ThreePlane() = default;
  ThreePlane(int width, int height, double fill = 0.0)
      : c0(width, height, fill), c1(width, height, fill), c2(width, height, fill) {}
  ThreePlane(Plane a, Plane b, Plane c) : c0(std::move(a)), c1(std::move(b)), c2(std::move(c)) {
    if (!c0.same_shape(c1) || !c0.same_shape(c2))
      throw std::invalid_argument("image planes must share dimensions");
  }

  int width() const noexcept { return c0.width(); }
  int height() const noexcept { return c0.height(); }

  Plane& plane(int i) { return i == 0 ? c0 : (i == 1 ? c1 : c2); }
  const Plane& plane(int i) const { return i == 0 ? c0 : (i == 1 ? c1 : c2); }

  bool same_shape(const ThreePlane& o) const noexcept { return c0.same_shape(o.c0); }

  friend bool operator==(const ThreePlane&, const ThreePlane&) = default;
};

struct RgbTag {};
struct YccTag {};

/// R, G, B in c0, c1, c2; values in [0, 1].
using RgbImage = ThreePlane<RgbTag>;
/// Y, Cb, Cr in c0, c1, c2; Y in [0, 1], chroma in [-0.5, 0.5].
using YccImage = ThreePlane<YccTag>;

inline void clamp_unit(Plane& p) {
  for (double& v : p.values()) v = std::clamp(v, 0.0, 1.0);
}

inline void clamp_unit(RgbImage& img) {
  for (int c = 0; c < 3; ++c) clamp_unit(img.plane(c));
}

/// Copies the rectangle [x0, x0+w) x [y0, y0+h).
inline Plane crop(const Plane& src, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > src.width() || y0 + h > src.height())
    throw std::out_of_range("crop rectangle outside image");
  Plane out(w, h);
  for (int y = 0; y < h; ++y) std::copy_n(src.row(y0 + y) + x0, w, out.row(y));
  return out;
}

inline RgbImage crop(const RgbImage& src, int x0, int y0, int w, int h) {
  return {crop(src.c0, x0, y0, w, h), crop(src.c1, x0, y0, w, h), crop(src.c2, x0, y0, w, h)};
}

}  // namespace flickerband
