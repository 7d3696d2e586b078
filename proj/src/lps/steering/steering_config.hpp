#pragma once

#include <cstdint>
#include <string>

#include "lps/core/config.hpp"

namespace lps::steering {

enum class FrozenMode {
  kStopgrad,  // score rollouts under the live world model, gradients blocked
  kSnapshot,  // score rollouts under a copy refreshed every snapshot_every steps
};

std::string to_string(FrozenMode mode);

// Reward-shaping variants for value training.
//   full:      policy branch trained on cosine-shaped rewards
//   binary:    expert branch only, raw binary rewards (no policy rollouts)
//   bootstrap: policy branch trained on raw rewards (no shaping term)
enum class RewardVariant { kFull, kBinary, kBootstrap };

std::string to_string(RewardVariant variant);
RewardVariant reward_variant_from_string(const std::string& name);

struct SteeringOptions {
  int64_t horizon = 16;
  double gamma = 0.99;
  double lambda = 0.95;
  double gamma_s = 0.9;
  int64_t n_plans = 64;
  RewardVariant variant = RewardVariant::kFull;
  FrozenMode frozen_mode = FrozenMode::kStopgrad;
  int64_t snapshot_every = 100;
  bool finetune_wm = false;

  void validate() const;
};

// Keys are unprefixed (horizon, gamma, ...); callers pass cfg.section("lps").
// frozen_mode accepts "stopgrad", "snapshot", or "snapshot(<steps>)".
SteeringOptions steering_options_from_config(const Config& cfg);
Config steering_options_to_config(const SteeringOptions& opt);

}  // namespace lps::steering
