#pragma once

#include <optional>

#include "lps/core/image.hpp"
#include "lps/envs/embodiment.hpp"
#include "lps/envs/vec2.hpp"

namespace lps::envs {

// Scene description in workspace coordinates ([0,1]^2, y up).
struct Scene {
  Vec2 agent;
  Sprite agent_sprite = Sprite::kDot;
  Vec2 goal;
  std::optional<Vec2> object;  // present for push scenes
};

// Rasterizes the scene to an RGB frame. Sprites are drawn with soft
// (anti-aliased) edges and a mild radial shade so dense optic flow has
// usable gradients; rendering is pure and deterministic.
Image render_scene(const Scene& scene, int height = 64, int width = 64);

}  // namespace lps::envs
