#pragma once

#include <string>
#include <vector>

#include "lps/core/image.hpp"

namespace lps::envs {

// One demonstration or rollout: T+1 frames bracketing T (action, reward)
// steps. Rewards are binary; successful demos end with rewards 0,...,0,1,1,1.
struct Episode {
  std::vector<Image> observations;
  std::vector<std::vector<float>> actions;
  std::vector<float> rewards;
  std::string embodiment_id;
  bool success = false;

  int length() const { return static_cast<int>(rewards.size()); }
  int action_dim() const { return actions.empty() ? 0 : static_cast<int>(actions[0].size()); }
};

// Throws lps::Error on any structural violation: frame/action/reward length
// mismatch, non-binary rewards, reward tail inconsistent with the success
// flag, action components outside [-bound, bound], or ragged frame shapes.
void check_episode(const Episode& ep, double action_bound = 1.0);

}  // namespace lps::envs
