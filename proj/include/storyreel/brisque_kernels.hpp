#pragma once

#include <array>
#include <vector>

#include "storyreel/image.hpp"

// Pixel kernels behind the BRISQUE features. `serial` is the reference;
// `omp` parallelizes over rows and must agree with it bit for bit (each output
// element is computed by the same expression in the same order).
namespace storyreel::brisque {

inline constexpr int kWindow = 7;
inline constexpr double kWindowSigma = 7.0 / 6.0;

// Normalized 7x7 Gaussian weights, row-major.
const std::array<double, kWindow * kWindow>& gaussian_weights();

// Symmetric (half-sample) border: -1 -> 0, n -> n-1.
inline int reflect(int i, int n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

// Orientation shifts (dy, dx) for the pairwise products: H, V, D1, D2.
inline constexpr std::array<std::array<int, 2>, 4> kShifts = {{{0, 1}, {1, 0}, {1, 1}, {1, -1}}};

namespace serial {
// (I - mu) / (sigma + c), sigma = sqrt(max(local variance, var_floor)).
GrayImage mscn(const GrayImage& img, double c, double var_floor);
// m(y, x) * m(y + dy, x + dx) over the region where both exist, row-major.
std::vector<double> pair_product(const GrayImage& m, int dy, int dx);
// 2x2 box average; odd trailing row/column dropped.
GrayImage downsample2(const GrayImage& img);
}  // namespace serial

namespace omp {
GrayImage mscn(const GrayImage& img, double c, double var_floor);
std::vector<double> pair_product(const GrayImage& m, int dy, int dx);
GrayImage downsample2(const GrayImage& img);
}  // namespace omp

}  // namespace storyreel::brisque
