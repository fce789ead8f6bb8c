#pragma once

#include <algorithm>
#include <cmath>

#include "storyreel/brisque_kernels.hpp"

// Per-element expressions shared by the serial and OpenMP kernels.
namespace storyreel::brisque::detail {

inline double mscn_at(const GrayImage& img, const std::array<double, kWindow * kWindow>& w, int x, int y, double c,
                      double var_floor) {
  const int r = kWindow / 2;
  const double center = img.at(x, y);
  // Mean offset relative to the center pixel keeps a flat patch exactly zero.
  double d = 0.0;
  for (int j = -r; j <= r; ++j) {
    const int yy = reflect(y + j, img.height);
    for (int i = -r; i <= r; ++i) d += w[(j + r) * kWindow + (i + r)] * (img.at(reflect(x + i, img.width), yy) - center);
  }
  const double mu = center + d;
  double var = 0.0;
  for (int j = -r; j <= r; ++j) {
    const int yy = reflect(y + j, img.height);
    for (int i = -r; i <= r; ++i) {
      const double e = img.at(reflect(x + i, img.width), yy) - mu;
      var += w[(j + r) * kWindow + (i + r)] * e * e;
    }
  }
  const double sigma = std::sqrt(std::max(var, var_floor));
  return -d / (sigma + c);
}

struct Region {
  int y0, x0, rows, cols;
};

inline Region product_region(const GrayImage& m, int dy, int dx) {
  Region g;
  g.y0 = std::max(0, -dy);
  g.x0 = std::max(0, -dx);
  g.rows = std::max(0, m.height - std::abs(dy));
  g.cols = std::max(0, m.width - std::abs(dx));
  return g;
}

inline void product_row(const GrayImage& m, int dy, int dx, const Region& g, int r, double* out) {
  const int y = g.y0 + r;
  double* row = out + static_cast<std::size_t>(r) * g.cols;
  for (int k = 0; k < g.cols; ++k) {
    const int x = g.x0 + k;
    row[k] = m.at(x, y) * m.at(x + dx, y + dy);
  }
}

inline double box_at(const GrayImage& img, int x, int y) {
  return (img.at(2 * x, 2 * y) + img.at(2 * x + 1, 2 * y) + img.at(2 * x, 2 * y + 1) + img.at(2 * x + 1, 2 * y + 1)) /
         4.0;
}

}  // namespace storyreel::brisque::detail
