#pragma once

#include <optional>
#include <string>

#include "lps/core/image.hpp"
#include "lps/core/rng.hpp"
#include "lps/envs/embodiment.hpp"
#include "lps/envs/render.hpp"
#include "lps/envs/vec2.hpp"

namespace lps::envs {

// Axis-aligned square region positions are sampled from at reset.
struct SpawnRegion {
  double lo = 0.0;
  double hi = 1.0;
  // Central fraction of the workspace, e.g. central(0.8) -> [0.1, 0.9].
  static SpawnRegion central(double fraction);
  static SpawnRegion full() { return {0.0, 1.0}; }
};

// 2-D point-mass workspace rendered to pixels. "reach": drive the effector
// into the goal ring. "push": carry a box into the goal ring via contact.
// Dynamics: v_world = gain * R(rotation) * clip(action), position clamped to
// [0,1]^2. Fully deterministic given the construction seed.
class PointmassEnv {
 public:
  PointmassEnv(EmbodimentConfig cfg, std::string task, uint64_t seed,
               SpawnRegion region = SpawnRegion::full());

  struct StepResult {
    Image obs;
    bool done = false;
    bool success = false;
  };

  Image reset();
  StepResult step(const Vec2& action);

  // Scripted expert in the embodiment's own action frame. Stateless: a pure
  // function of the current layout, so replaying recorded actions reproduces
  // the trajectory exactly.
  Vec2 expert_action() const;

  Image render() const;

  const EmbodimentConfig& config() const { return cfg_; }
  const std::string& task() const { return task_; }
  bool is_push() const { return task_ == "push"; }
  int step_count() const { return step_count_; }
  bool done() const { return done_; }
  const Vec2& agent() const { return agent_; }
  const Vec2& goal() const { return goal_; }
  const Vec2& object_pos() const;
  double success_threshold() const { return kSuccessThreshold; }
  double contact_radius() const { return kContactRadius; }

  static constexpr double kSuccessThreshold = 0.05;
  static constexpr double kContactRadius = 0.10;

 private:
  void sample_layout();
  bool success_now() const;
  Scene scene() const;

  EmbodimentConfig cfg_;
  std::string task_;
  SpawnRegion region_;
  Rng rng_;
  Vec2 agent_;
  Vec2 object_;
  Vec2 goal_;
  int step_count_ = 0;
  bool done_ = true;  // must reset() before step()
};

PointmassEnv make_env(const EmbodimentConfig& cfg, const std::string& task, uint64_t seed,
                      SpawnRegion region = SpawnRegion::full());

}  // namespace lps::envs
