#pragma once

#include <cstdint>
#include <vector>

namespace lps {

// Interleaved RGB, row-major, 8-bit.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> data;  // height*width*3

  Image() = default;
  Image(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w * 3, 0) {}

  uint8_t& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  uint8_t at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  size_t size_bytes() const { return data.size(); }
  bool same_shape(const Image& o) const { return height == o.height && width == o.width; }
};

// Grayscale float plane in [0,1], used by the flow estimator.
std::vector<float> to_gray(const Image& img);

}  // namespace lps
