#include "lps/envs/pointmass_env.hpp"

#include <algorithm>
#include <cmath>

#include "lps/core/check.hpp"

namespace lps::envs {
namespace {

constexpr double kExpertGain = 3.0;  // proportional gain of the scripted controller

}  // namespace

SpawnRegion SpawnRegion::central(double fraction) {
  LPS_CHECK(fraction > 0.0 && fraction <= 1.0, "spawn fraction must be in (0, 1]");
  const double margin = (1.0 - fraction) / 2.0;
  return {margin, 1.0 - margin};
}

PointmassEnv::PointmassEnv(EmbodimentConfig cfg, std::string task, uint64_t seed,
                           SpawnRegion region)
    : cfg_(std::move(cfg)), task_(std::move(task)), region_(region), rng_(seed) {
  cfg_.validate();
  LPS_CHECK(task_ == "reach" || task_ == "push", "unknown task '" + task_ + "'");
  LPS_CHECK(region_.lo >= 0.0 && region_.hi <= 1.0 && region_.lo < region_.hi,
            "invalid spawn region");
}

const Vec2& PointmassEnv::object_pos() const {
  LPS_CHECK(is_push(), "object_pos() is only defined for push");
  return object_;
}

void PointmassEnv::sample_layout() {
  auto sample = [&] { return Vec2{rng_.uniform(region_.lo, region_.hi),
                                  rng_.uniform(region_.lo, region_.hi)}; };
  for (int attempt = 0; attempt < 1000; ++attempt) {
    agent_ = sample();
    goal_ = sample();
    if (task_ == "reach") {
      if ((agent_ - goal_).norm() >= 0.25) return;
    } else {
      object_ = sample();
      const bool separated = (object_ - goal_).norm() >= 0.20 &&
                             (agent_ - object_).norm() >= kContactRadius + 0.05 &&
                             (agent_ - goal_).norm() >= 0.10;
      if (separated) return;
    }
  }
  LPS_FAIL("failed to sample a valid layout after 1000 attempts");
}

Image PointmassEnv::reset() {
  sample_layout();
  step_count_ = 0;
  done_ = false;
  return render();
}

bool PointmassEnv::success_now() const {
  const Vec2& mover = is_push() ? object_ : agent_;
  return (mover - goal_).norm() < kSuccessThreshold;
}

PointmassEnv::StepResult PointmassEnv::step(const Vec2& action) {
  LPS_CHECK(!done_, "step() called on a finished episode; call reset()");
  LPS_CHECK(std::isfinite(action.x) && std::isfinite(action.y),
            "non-finite action component");
  const Vec2 clipped{std::clamp(action.x, -1.0, 1.0), std::clamp(action.y, -1.0, 1.0)};
  const Vec2 before = agent_;
  agent_ = clamp01(agent_ + cfg_.world_velocity(clipped));
  if (is_push() && (before - object_).norm() <= kContactRadius) {
    // Sticky contact: the box rides along with the effector's displacement.
    object_ = clamp01(object_ + (agent_ - before));
  }
  ++step_count_;
  StepResult result;
  result.success = success_now();
  result.done = result.success || step_count_ >= cfg_.max_steps;
  done_ = result.done;
  result.obs = render();
  return result;
}

Vec2 PointmassEnv::expert_action() const {
  Vec2 v_world;
  if (task_ == "reach") {
    v_world = (goal_ - agent_) * kExpertGain;
  } else if ((object_ - agent_).norm() <= kContactRadius) {
    // In contact the box rides with the effector, so servo on the box's own
    // error until it lands on the goal.
    v_world = (goal_ - object_) * kExpertGain;
  } else {
    v_world = (object_ - agent_) * kExpertGain;
  }
  const double vmax = 0.9 * cfg_.max_world_speed();
  return cfg_.action_from_world_velocity(v_world.clamped_norm(vmax));
}

Scene PointmassEnv::scene() const {
  Scene s;
  s.agent = agent_;
  s.agent_sprite = cfg_.effector_sprite;
  s.goal = goal_;
  if (is_push()) s.object = object_;
  return s;
}

Image PointmassEnv::render() const { return render_scene(scene()); }

PointmassEnv make_env(const EmbodimentConfig& cfg, const std::string& task, uint64_t seed,
                      SpawnRegion region) {
  return PointmassEnv(cfg, task, seed, region);
}

}  // namespace lps::envs
