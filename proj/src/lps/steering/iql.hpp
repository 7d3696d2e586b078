#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lps/core/config.hpp"
#include "lps/policy/bc_policy.hpp"
#include "lps/steering/plan_selector.hpp"
#include "lps/wm/conv_nets.hpp"

namespace lps::steering {

struct IqlOptions {
  // Image mode runs a conv torso over [B, C, H, W] observations; vector mode
  // takes precomputed [B, obs_embed] features directly (used by small-MDP
  // sanity checks).
  bool image_input = true;
  int64_t obs_hw = 64;
  int64_t obs_channels = 3;
  std::vector<int64_t> conv_channels = {8, 16, 32, 64};
  int64_t obs_embed = 128;
  int64_t action_dim = 2;
  int64_t hidden = 256;
  double gamma = 0.99;
  double tau = 0.7;      // expectile for the V regression
  double polyak = 0.99;  // target-Q smoothing coefficient

  void validate() const;
};

Config iql_options_to_config(const IqlOptions& opt);
IqlOptions iql_options_from_config(const Config& cfg);

struct IqlBatch {
  torch::Tensor obs;       // [B, C, H, W] or [B, obs_embed]
  torch::Tensor actions;   // [B, action_dim]
  torch::Tensor rewards;   // [B]
  torch::Tensor next_obs;  // same shape as obs
  torch::Tensor done;      // [B] in {0, 1}
};

// Implicit Q-learning on offline transitions: V regresses toward target-Q
// values with an expectile-weighted squared error, Q regresses toward
// r + gamma * (1 - done) * V(s'). The target Q network trails the live one
// by polyak averaging.
class IqlImpl : public torch::nn::Module {
 public:
  explicit IqlImpl(IqlOptions opts);

  torch::Tensor q_value(torch::Tensor obs, torch::Tensor actions);  // [B]
  torch::Tensor state_value(torch::Tensor obs);                     // [B]

  std::map<std::string, double> train_step(torch::optim::Optimizer& optimizer,
                                           const IqlBatch& batch);

  // Parameters the optimizer should own (target network excluded).
  std::vector<torch::Tensor> live_parameters();

  IqlOptions options;

 private:
  torch::Tensor embed(torch::Tensor obs, bool target);
  void polyak_update();

  wm::ConvEncoder torso_{nullptr}, torso_target_{nullptr};
  torch::nn::Sequential q_head_{nullptr}, v_head_{nullptr}, q_target_head_{nullptr};
};

TORCH_MODULE(Iql);

void save_iql(const Iql& iql, const std::filesystem::path& path,
              const std::map<std::string, std::string>& extra_manifest = {});
struct LoadedIql {
  Iql model{nullptr};
  std::map<std::string, std::string> manifest;
};
LoadedIql load_iql(const std::filesystem::path& path);

// Score of a candidate plan from an observation: Q(s, first action).
double q_plan_score(Iql& iql, torch::Tensor obs, torch::Tensor plan);

// Q-ranked selection over sampled policy plans; the world model plays no part.
PlanSelection select_plan_by_q(policy::BcPolicy& policy, Iql& iql, torch::Tensor obs,
                               int64_t n_plans, uint64_t seed);

}  // namespace lps::steering
