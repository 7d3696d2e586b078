#pragma once

#include <vector>

namespace lps::flow {

// Dense per-pixel displacement between two consecutive frames, in pixels.
// u is horizontal (+x = rightward), v is vertical (+y = downward in image
// rows). Index t in an episode describes motion from frame t to frame t+1.
struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<float> u;
  std::vector<float> v;

  FlowField() = default;
  FlowField(int h, int w)
      : height(h), width(w),
        u(static_cast<size_t>(h) * w, 0.0f),
        v(static_cast<size_t>(h) * w, 0.0f) {}

  float& u_at(int y, int x) { return u[static_cast<size_t>(y) * width + x]; }
  float& v_at(int y, int x) { return v[static_cast<size_t>(y) * width + x]; }
  float u_at(int y, int x) const { return u[static_cast<size_t>(y) * width + x]; }
  float v_at(int y, int x) const { return v[static_cast<size_t>(y) * width + x]; }
};

// Throws lps::Error if shapes are inconsistent, entries are non-finite, or
// any |u| or |v| exceeds the frame width (sanity bound).
void check_flow_field(const FlowField& flow);

}  // namespace lps::flow
