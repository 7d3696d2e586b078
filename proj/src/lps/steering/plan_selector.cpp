#include "lps/steering/plan_selector.hpp"

#include "lps/core/check.hpp"
#include "lps/core/hash.hpp"
#include "lps/steering/returns.hpp"

namespace lps::steering {

namespace {

wm::LatentState repeat_state(const wm::LatentState& state, int64_t n) {
  wm::LatentState out;
  out.deter = state.deter.repeat({n, 1});
  out.probs = state.probs.repeat({n, 1, 1});
  out.stoch = state.stoch.repeat({n, 1, 1});
  return out;
}

}  // namespace

int64_t argmax_lowest(const std::vector<double>& scores) {
  LPS_CHECK(!scores.empty(), "argmax_lowest: empty scores");
  int64_t best = 0;
  for (size_t i = 1; i < scores.size(); ++i) {
    LPS_CHECK(std::isfinite(scores[i]), "argmax_lowest: non-finite score at index " << i);
    if (scores[i] > scores[best]) best = static_cast<int64_t>(i);
  }
  LPS_CHECK(std::isfinite(scores[0]), "argmax_lowest: non-finite score at index 0");
  return best;
}

PlanRollout rollout_candidate_plans(policy::BcPolicy& policy, wm::WorldModel& wm,
                                    torch::Tensor obs, const SteeringOptions& opt,
                                    uint64_t seed) {
  opt.validate();
  LPS_CHECK(policy->options.horizon == opt.horizon,
            "rollout_candidate_plans: policy horizon " << policy->options.horizon
                                                       << " != steering horizon " << opt.horizon);
  LPS_CHECK(wm->options.action_source == "raw",
            "rollout_candidate_plans: world model must take raw actions");
  torch::NoGradGuard no_grad;
  auto plans = policy->sample_plans(obs, opt.n_plans, derive_seed(seed, "plans"));
  auto start = wm->encode_state(obs.dim() == 3 ? obs.unsqueeze(0) : obs, wm::SampleMode::kMode);
  auto states = wm->rollout_raw(repeat_state(start, opt.n_plans), plans, wm::SampleMode::kMode);
  std::vector<torch::Tensor> feats;
  feats.reserve(states.size());
  for (const auto& s : states) feats.push_back(s.feature());
  return PlanRollout{plans, torch::stack(feats, /*dim=*/1)};
}

PlanSelection select_plan(policy::BcPolicy& policy, wm::WorldModel& wm, ValueFunction& vf,
                          torch::Tensor obs, const SteeringOptions& opt, uint64_t seed) {
  torch::NoGradGuard no_grad;
  auto rollout = rollout_candidate_plans(policy, wm, obs, opt, seed);
  const int64_t n = rollout.features.size(0);
  const int64_t steps = rollout.features.size(1);
  const int64_t dim = rollout.features.size(2);
  auto values = vf->value(rollout.features.reshape({n * steps, dim})).reshape({n, steps});
  auto scored = plan_score_t(values, opt.gamma_s);
  std::vector<double> scores(n);
  for (int64_t i = 0; i < n; ++i) scores[i] = scored[i].item<double>();
  const int64_t best = argmax_lowest(scores);
  return PlanSelection{rollout.plans[best].clone(), best, std::move(scores)};
}

GoalLibrary build_goal_library(wm::WorldModel& wm, const std::vector<envs::Episode>& demos) {
  LPS_CHECK(!demos.empty(), "build_goal_library: no demos");
  torch::NoGradGuard no_grad;
  GoalLibrary lib;
  std::vector<torch::Tensor> firsts;
  firsts.reserve(demos.size());
  for (const auto& demo : demos) {
    LPS_CHECK(!demo.observations.empty(), "build_goal_library: demo without frames");
    firsts.push_back(wm::obs_to_tensor(demo.observations.front()));
    lib.goal_frames.push_back(wm::obs_to_tensor(demo.observations.back()));
  }
  lib.first_embeds = wm->encode_obs(torch::stack(firsts, 0));
  return lib;
}

int64_t nearest_goal_index(wm::WorldModel& wm, const GoalLibrary& library, torch::Tensor obs) {
  LPS_CHECK(library.first_embeds.defined() && library.first_embeds.size(0) > 0,
            "nearest_goal_index: empty goal library");
  torch::NoGradGuard no_grad;
  auto embed = wm->encode_obs(obs.dim() == 3 ? obs.unsqueeze(0) : obs);
  auto dist = (library.first_embeds - embed).norm(2, /*dim=*/1);
  std::vector<double> neg(dist.size(0));
  for (int64_t i = 0; i < dist.size(0); ++i) neg[i] = -dist[i].item<double>();
  return argmax_lowest(neg);
}

torch::Tensor goal_scores(torch::Tensor final_features, torch::Tensor goal_feature) {
  LPS_CHECK(final_features.dim() == 2, "goal_scores: final_features must be [N, D]");
  LPS_CHECK(goal_feature.dim() == 1 && goal_feature.size(0) == final_features.size(1),
            "goal_scores: goal_feature must be [D] matching final_features");
  auto goal = goal_feature.unsqueeze(0).expand_as(final_features);
  return cosine_rows(final_features, goal);
}

PlanSelection select_plan_by_goal(policy::BcPolicy& policy, wm::WorldModel& wm,
                                  const GoalLibrary& library, torch::Tensor obs,
                                  const SteeringOptions& opt, uint64_t seed) {
  torch::NoGradGuard no_grad;
  const int64_t goal_idx = nearest_goal_index(wm, library, obs);
  auto goal_state =
      wm->encode_state(library.goal_frames[goal_idx].unsqueeze(0), wm::SampleMode::kMode);
  auto rollout = rollout_candidate_plans(policy, wm, obs, opt, seed);
  auto finals = rollout.features.select(1, rollout.features.size(1) - 1);
  auto scored = goal_scores(finals, goal_state.feature().squeeze(0));
  std::vector<double> scores(scored.size(0));
  for (int64_t i = 0; i < scored.size(0); ++i) scores[i] = scored[i].item<double>();
  const int64_t best = argmax_lowest(scores);
  return PlanSelection{rollout.plans[best].clone(), best, std::move(scores)};
}

}  // namespace lps::steering
