#include <cmath>

#include "brisque_pixel.hpp"
#include "storyreel/brisque_kernels.hpp"

namespace storyreel::brisque {

const std::array<double, kWindow * kWindow>& gaussian_weights() {
  static const auto weights = [] {
    std::array<double, kWindow * kWindow> w{};
    const int r = kWindow / 2;
    double sum = 0.0;
    for (int y = -r; y <= r; ++y)
      for (int x = -r; x <= r; ++x) {
        double v = std::exp(-(x * x + y * y) / (2.0 * kWindowSigma * kWindowSigma));
        w[(y + r) * kWindow + (x + r)] = v;
        sum += v;
      }
    for (double& v : w) v /= sum;
    return w;
  }();
  return weights;
}

namespace serial {

GrayImage mscn(const GrayImage& img, double c, double var_floor) {
  GrayImage out(img.width, img.height);
  const auto& w = gaussian_weights();
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out.at(x, y) = detail::mscn_at(img, w, x, y, c, var_floor);
  return out;
}

std::vector<double> pair_product(const GrayImage& m, int dy, int dx) {
  const auto region = detail::product_region(m, dy, dx);
  std::vector<double> out(static_cast<std::size_t>(region.rows) * region.cols);
  for (int r = 0; r < region.rows; ++r) detail::product_row(m, dy, dx, region, r, out.data());
  return out;
}

GrayImage downsample2(const GrayImage& img) {
  GrayImage out(img.width / 2, img.height / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(x, y) = detail::box_at(img, x, y);
  return out;
}

}  // namespace serial
}  // namespace storyreel::brisque
