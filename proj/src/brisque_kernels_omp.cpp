#include "brisque_pixel.hpp"
#include "storyreel/brisque_kernels.hpp"

namespace storyreel::brisque::omp {

GrayImage mscn(const GrayImage& img, double c, double var_floor) {
  GrayImage out(img.width, img.height);
  const auto& w = gaussian_weights();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out.at(x, y) = detail::mscn_at(img, w, x, y, c, var_floor);
  return out;
}

std::vector<double> pair_product(const GrayImage& m, int dy, int dx) {
  const auto region = detail::product_region(m, dy, dx);
  std::vector<double> out(static_cast<std::size_t>(region.rows) * region.cols);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < region.rows; ++r) detail::product_row(m, dy, dx, region, r, out.data());
  return out;
}

GrayImage downsample2(const GrayImage& img) {
  GrayImage out(img.width / 2, img.height / 2);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(x, y) = detail::box_at(img, x, y);
  return out;
}

}  // namespace storyreel::brisque::omp
