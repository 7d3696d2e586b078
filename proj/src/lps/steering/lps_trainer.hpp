#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "lps/policy/bc_policy.hpp"
#include "lps/steering/steering_config.hpp"
#include "lps/steering/value_function.hpp"
#include "lps/wm/world_model.hpp"

namespace lps::steering {

// One training slice: frames x_t..x_{t+h}, the expert actions and binary
// rewards of the h steps between them.
struct LpsBatch {
  torch::Tensor obs_seq;  // [B, h+1, C, H, W] in [0, 1]
  torch::Tensor actions;  // [B, h, action_dim]
  torch::Tensor rewards;  // [B, h]
};

// Trains the deviation-penalizing value function: rolls expert and policy
// action chunks from a shared encoded start state under a frozen world model,
// shapes the policy branch's rewards by latent cosine deviation, computes
// lambda returns for both branches, and regresses the value net on the
// concatenated (state, return) pairs. Gradients never reach the world model
// through the value loss; with finetune_wm the world model takes its own
// supervised reconstruction step first.
class LpsTrainer {
 public:
  LpsTrainer(wm::WorldModel wm, policy::BcPolicy policy, ValueFunction vf,
             SteeringOptions options, uint64_t seed, double value_lr = 1e-3,
             double wm_lr = 3e-4);

  // Runs one Algorithm-1 step and returns scalar diagnostics
  // (value_loss, target_mean, cos_mean, ... plus wm_* when finetuning).
  std::map<std::string, double> train_step(const LpsBatch& batch);

  const SteeringOptions& options() const { return options_; }
  wm::WorldModel& world_model() { return wm_; }
  ValueFunction& value_function() { return vf_; }
  int64_t steps() const { return step_; }

 private:
  wm::WorldModel& scoring_model();

  SteeringOptions options_;
  wm::WorldModel wm_;
  wm::WorldModel snapshot_{nullptr};
  policy::BcPolicy policy_;
  ValueFunction vf_;
  std::unique_ptr<torch::optim::Adam> vf_opt_;
  std::unique_ptr<torch::optim::Adam> wm_opt_;
  uint64_t seed_ = 0;
  int64_t step_ = 0;
};

}  // namespace lps::steering
