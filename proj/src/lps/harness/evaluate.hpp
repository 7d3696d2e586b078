#pragma once

#include <cstdint>
#include <string>

#include "lps/envs/embodiment.hpp"
#include "lps/envs/pointmass_env.hpp"
#include "lps/harness/report.hpp"
#include "lps/policy/bc_policy.hpp"
#include "lps/steering/iql.hpp"
#include "lps/steering/plan_selector.hpp"
#include "lps/steering/steering_config.hpp"
#include "lps/steering/value_function.hpp"
#include "lps/wm/world_model.hpp"

namespace lps::harness {

// Models an evaluation method may need; only the fields the method uses must
// be populated (bc: policy; lps: policy+wm+vf; wm_goal: policy+wm+goals;
// iql: policy+iql).
struct EvalModels {
  policy::BcPolicy policy{nullptr};
  wm::WorldModel wm{nullptr};
  steering::ValueFunction vf{nullptr};
  steering::Iql iql{nullptr};
  steering::GoalLibrary goals;
};

struct EvalSpec {
  std::string task;
  envs::EmbodimentConfig embodiment;
  envs::SpawnRegion region = envs::SpawnRegion::full();
  steering::SteeringOptions steering;
  std::string method;  // bc | lps | wm_goal | iql
  int64_t n_episodes = 100;
  int workers = 1;
};

// One episode under the given method: each decision selects a plan and
// executes it open-loop for h env steps, then re-plans from the new frame.
// Success is the environment's ground-truth flag.
bool run_episode(EvalModels& models, const EvalSpec& spec, uint64_t episode_seed);

// n_episodes seeded episodes fanned out over `workers` threads. Episode i
// always runs with seed derive_seed(seed, "episode", i), so the outcome is
// independent of the worker count.
ResultRow evaluate_seed(EvalModels& models, const EvalSpec& spec, uint64_t seed);

}  // namespace lps::harness
