#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace storyreel {

// 8-bit interleaved image, 1 (gray) or 3 (RGB) channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// Row-major real-valued single-channel plane on the [0,255] intensity scale.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

// Deterministic PNG encoding (no timestamps or text chunks).
std::string encode_png(const Image& image, int compression_level = 6);

// Decodes any PNG color type / bit depth into 8-bit gray or RGB (alpha dropped).
Image decode_png(std::string_view bytes);

// ITU-R BT.601 luma: 0.299 R + 0.587 G + 0.114 B.
GrayImage to_gray(const Image& image);

}  // namespace storyreel
