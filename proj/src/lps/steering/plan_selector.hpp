#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "lps/envs/episode.hpp"
#include "lps/policy/bc_policy.hpp"
#include "lps/steering/steering_config.hpp"
#include "lps/steering/value_function.hpp"
#include "lps/wm/world_model.hpp"

namespace lps::steering {

struct PlanSelection {
  torch::Tensor plan;          // [h, action_dim] chosen action chunk
  int64_t index = 0;           // position among the sampled candidates
  std::vector<double> scores;  // score per candidate
};

// Index of the best score; ties break to the lowest index.
int64_t argmax_lowest(const std::vector<double>& scores);

struct PlanRollout {
  torch::Tensor plans;     // [N, h, action_dim]
  torch::Tensor features;  // [N, h+1, feature_dim] latent features incl. start
};

// Samples n_plans candidate chunks from the policy for a single observation
// [3, H, W] and rolls each out through the world model's dynamics
// (deterministic mode latents). The start state is the encoded observation,
// shared across candidates.
PlanRollout rollout_candidate_plans(policy::BcPolicy& policy, wm::WorldModel& wm,
                                    torch::Tensor obs, const SteeringOptions& opt,
                                    uint64_t seed);

// Value-ranked selection: scores each rollout by the discounted-weight mean
// of per-state values (plan_score) and returns the argmax candidate.
PlanSelection select_plan(policy::BcPolicy& policy, wm::WorldModel& wm, ValueFunction& vf,
                          torch::Tensor obs, const SteeringOptions& opt, uint64_t seed);

// Goal-conditioned baseline: demo first-frame embeddings index a library of
// final frames; at selection time the demo whose first frame embeds nearest
// to the current observation donates its final frame as the goal image.
struct GoalLibrary {
  torch::Tensor first_embeds;              // [n_demos, embed_dim]
  std::vector<torch::Tensor> goal_frames;  // per demo, [3, H, W] final frame
};

GoalLibrary build_goal_library(wm::WorldModel& wm, const std::vector<envs::Episode>& demos);

int64_t nearest_goal_index(wm::WorldModel& wm, const GoalLibrary& library, torch::Tensor obs);

// Cosine similarity between each rollout's final latent feature and the goal
// feature: [N, D] x [D] -> [N].
torch::Tensor goal_scores(torch::Tensor final_features, torch::Tensor goal_feature);

// Goal-ranked selection: picks the candidate whose final latent lands closest
// (by cosine) to the encoded goal image.
PlanSelection select_plan_by_goal(policy::BcPolicy& policy, wm::WorldModel& wm,
                                  const GoalLibrary& library, torch::Tensor obs,
                                  const SteeringOptions& opt, uint64_t seed);

}  // namespace lps::steering
