#include "lps/envs/embodiment.hpp"

#include <algorithm>
#include <cmath>

#include "lps/core/check.hpp"

namespace lps::envs {

Sprite sprite_from_string(const std::string& name) {
  if (name == "dot") return Sprite::kDot;
  if (name == "cross") return Sprite::kCross;
  if (name == "square") return Sprite::kSquare;
  if (name == "bar") return Sprite::kBar;
  LPS_FAIL("unknown sprite '" + name + "'");
}

std::string sprite_to_string(Sprite s) {
  switch (s) {
    case Sprite::kDot: return "dot";
    case Sprite::kCross: return "cross";
    case Sprite::kSquare: return "square";
    case Sprite::kBar: return "bar";
  }
  LPS_FAIL("invalid sprite enum value");
}

void EmbodimentConfig::validate() const {
  LPS_CHECK(!embodiment_id.empty(), "embodiment_id must be non-empty");
  LPS_CHECK(action_dim == 2, "embodiment '" + embodiment_id + "': action_dim must be 2");
  LPS_CHECK(action_gain[0] > 0.0 && action_gain[1] > 0.0,
            "embodiment '" + embodiment_id + "': action_gain components must be positive");
  LPS_CHECK(std::isfinite(action_rotation),
            "embodiment '" + embodiment_id + "': action_rotation must be finite");
  LPS_CHECK(max_steps > 0, "embodiment '" + embodiment_id + "': max_steps must be positive");
}

Vec2 EmbodimentConfig::world_velocity(const Vec2& action) const {
  const Vec2 r = rotate(action, action_rotation);
  return {action_gain[0] * r.x, action_gain[1] * r.y};
}

Vec2 EmbodimentConfig::action_from_world_velocity(const Vec2& v) const {
  const Vec2 scaled{v.x / action_gain[0], v.y / action_gain[1]};
  Vec2 a = rotate(scaled, -action_rotation);
  a.x = std::clamp(a.x, -1.0, 1.0);
  a.y = std::clamp(a.y, -1.0, 1.0);
  return a;
}

double EmbodimentConfig::max_world_speed() const {
  return std::min(action_gain[0], action_gain[1]);
}

EmbodimentConfig stock_embodiment(const std::string& id) {
  EmbodimentConfig cfg;
  cfg.embodiment_id = id;
  if (id == "identity") {
    // Baseline body: unit mapping, drawn as a dot.
  } else if (id == "gain2x") {
    cfg.action_gain = {0.10, 0.10};
  } else if (id == "rot90") {
    cfg.action_rotation = M_PI / 2.0;
    cfg.effector_sprite = Sprite::kCross;
  } else if (id == "barbot") {
    cfg.effector_sprite = Sprite::kBar;
    cfg.action_gain = {0.05, 0.04};
  } else if (id == "heldout") {
    // Evaluation target: differs from every pool entry in gain, rotation
    // and sprite, standing in for an unseen robot.
    cfg.action_gain = {0.06, 0.04};
    cfg.action_rotation = M_PI / 6.0;
    cfg.effector_sprite = Sprite::kSquare;
  } else {
    LPS_FAIL("unknown stock embodiment '" + id + "'");
  }
  cfg.validate();
  return cfg;
}

std::vector<std::string> pool_embodiment_ids() {
  return {"identity", "gain2x", "rot90", "barbot"};
}

EmbodimentConfig for_task(EmbodimentConfig cfg, const std::string& task) {
  if (task == "reach") {
    cfg.max_steps = 60;
  } else if (task == "push") {
    cfg.max_steps = 100;
  } else {
    LPS_FAIL("unknown task '" + task + "'");
  }
  return cfg;
}

void validate_pool(const std::vector<EmbodimentConfig>& pool) {
  LPS_CHECK(!pool.empty(), "embodiment pool must be non-empty");
  for (const auto& cfg : pool) cfg.validate();
  for (size_t i = 0; i < pool.size(); ++i) {
    for (size_t j = i + 1; j < pool.size(); ++j) {
      const auto& a = pool[i];
      const auto& b = pool[j];
      const bool same_gain = std::abs(a.action_gain[0] - b.action_gain[0]) < 1e-12 &&
                             std::abs(a.action_gain[1] - b.action_gain[1]) < 1e-12;
      const bool same_rot = std::abs(a.action_rotation - b.action_rotation) < 1e-12;
      const bool same_sprite = a.effector_sprite == b.effector_sprite;
      LPS_CHECK(!(same_gain && same_rot && same_sprite),
                "embodiments '" + a.embodiment_id + "' and '" + b.embodiment_id +
                    "' are indistinguishable (same gain, rotation and sprite)");
    }
  }
}

}  // namespace lps::envs
