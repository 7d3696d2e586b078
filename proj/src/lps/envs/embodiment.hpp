#pragma once

#include <array>
#include <string>
#include <vector>

#include "lps/envs/vec2.hpp"

namespace lps::envs {

enum class Sprite { kDot, kCross, kSquare, kBar };

Sprite sprite_from_string(const std::string& name);
std::string sprite_to_string(Sprite s);

// One controllable body: how raw actions map to workspace motion and how the
// effector is drawn. Two embodiments sharing gain, rotation and sprite are
// visually and dynamically indistinguishable, which validate_pool rejects.
struct EmbodimentConfig {
  std::string embodiment_id;
  int action_dim = 2;
  std::array<double, 2> action_gain = {0.05, 0.05};
  double action_rotation = 0.0;  // radians, action frame -> world frame
  Sprite effector_sprite = Sprite::kDot;
  int max_steps = 60;

  void validate() const;

  // World-frame velocity produced by a (clipped) raw action.
  Vec2 world_velocity(const Vec2& action) const;
  // Inverse of world_velocity, clipped to the unit action box.
  Vec2 action_from_world_velocity(const Vec2& v) const;
  // Largest world speed reachable in every direction: min gain (the unit
  // action box rotated into world frame always contains this disc).
  double max_world_speed() const;
};

// Embodiments used for the pretraining pool: "identity", "gain2x", "rot90",
// "barbot". "heldout" is the evaluation target and is not in the pool.
EmbodimentConfig stock_embodiment(const std::string& id);
std::vector<std::string> pool_embodiment_ids();

// Copy with the episode cap appropriate for the task ("reach" or "push").
EmbodimentConfig for_task(EmbodimentConfig cfg, const std::string& task);

// Rejects pools where any two entries share gain, rotation and sprite.
void validate_pool(const std::vector<EmbodimentConfig>& pool);

}  // namespace lps::envs
