#pragma once

// Iterative radix-2 FFT and a 2D wrapper over row-major grids.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace flickerband {

using Complex = std::complex<double>;

constexpr bool is_pow2(std::size_t n) noexcept { return n && !(n & (n - 1)); }

constexpr std::size_t next_pow2(std::size_t n) noexcept {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// In-place forward transform, X[k] = sum_n x[n] exp(-2 pi i k n / N).
inline void fft_inplace(std::vector<Complex>& a) {
  const std::size_t n = a.size();
  if (!is_pow2(n)) throw std::invalid_argument("fft: length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  std::vector<Complex> tw(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k)
    tw[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2, stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex w = tw[k * stride];
        const Complex b = a[i + k + half];
        const Complex u = a[i + k];
        const Complex v(b.real() * w.real() - b.imag() * w.imag(), b.real() * w.imag() + b.imag() * w.real());
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

/// Forward 2D transform of an ny x nx row-major grid (both powers of two).
inline void fft2_inplace(std::vector<Complex>& grid, std::size_t nx, std::size_t ny) {
  if (grid.size() != nx * ny) throw std::invalid_argument("fft2: grid size mismatch");
  std::vector<Complex> line(nx);
  for (std::size_t y = 0; y < ny; ++y) {
    std::copy_n(grid.begin() + static_cast<std::ptrdiff_t>(y * nx), nx, line.begin());
    fft_inplace(line);
    std::copy(line.begin(), line.end(), grid.begin() + static_cast<std::ptrdiff_t>(y * nx));
  }
  line.resize(ny);
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t y = 0; y < ny; ++y) line[y] = grid[y * nx + x];
    fft_inplace(line);
    for (std::size_t y = 0; y < ny; ++y) grid[y * nx + x] = line[y];
  }
}

}  // namespace flickerband
