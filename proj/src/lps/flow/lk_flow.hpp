#pragma once

#include "lps/core/image.hpp"
#include "lps/flow/flow_field.hpp"

namespace lps::flow {

// Classical coarse-to-fine differential flow: iterative Lucas-Kanade over a
// window, refined across an image pyramid. Handles the few-pixel-per-frame
// motions these scenes produce; regularized normal equations return zero
// flow wherever the image is textureless. Pure and deterministic.
struct LkOptions {
  int levels = 3;            // pyramid depth (finest level included)
  int iterations = 3;        // refinement passes per level
  int window_radius = 3;     // (2r+1)^2 support for the normal equations
  double ridge = 1e-4;       // diagonal regularizer, scaled by window area
  double max_displacement = 16.0;  // per-level clamp on accumulated flow
};

FlowField lk_pyramid_flow(const Image& frame_a, const Image& frame_b,
                          const LkOptions& options = {});

}  // namespace lps::flow
