#include "lps/core/image.hpp"

namespace lps {

std::vector<float> to_gray(const Image& img) {
  std::vector<float> out(static_cast<size_t>(img.height) * img.width);
  const uint8_t* p = img.data.data();
  for (size_t i = 0; i < out.size(); ++i) {
    const float r = p[i * 3 + 0], g = p[i * 3 + 1], b = p[i * 3 + 2];
    out[i] = (0.299f * r + 0.587f * g + 0.114f * b) / 255.0f;
  }
  return out;
}

}  // namespace lps
