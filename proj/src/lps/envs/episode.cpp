#include "lps/envs/episode.hpp"

#include <cmath>

#include "lps/core/check.hpp"

namespace lps::envs {

void check_episode(const Episode& ep, double action_bound) {
  const size_t t = ep.rewards.size();
  LPS_CHECK(t >= 1, "episode has no steps");
  LPS_CHECK(ep.observations.size() == t + 1,
            "episode needs T+1 observations, got " + std::to_string(ep.observations.size()) +
                " for T=" + std::to_string(t));
  LPS_CHECK(ep.actions.size() == t, "episode action count != reward count");
  LPS_CHECK(!ep.embodiment_id.empty(), "episode missing embodiment_id");

  const int dim = ep.action_dim();
  LPS_CHECK(dim >= 1, "episode actions are empty vectors");
  for (const auto& a : ep.actions) {
    LPS_CHECK(static_cast<int>(a.size()) == dim, "ragged action dimensions");
    for (float c : a) {
      LPS_CHECK(std::isfinite(c) && std::abs(c) <= action_bound + 1e-6,
                "action component " + std::to_string(c) + " outside bound " +
                    std::to_string(action_bound));
    }
  }

  for (float r : ep.rewards) {
    LPS_CHECK(r == 0.0f || r == 1.0f, "non-binary reward " + std::to_string(r));
  }
  if (ep.success) {
    LPS_CHECK(t >= 3, "successful episode shorter than 3 steps");
    for (size_t i = 0; i < t; ++i) {
      const float expected = i >= t - 3 ? 1.0f : 0.0f;
      LPS_CHECK(ep.rewards[i] == expected,
                "successful episode must have rewards 0,...,0,1,1,1; index " +
                    std::to_string(i) + " is " + std::to_string(ep.rewards[i]));
    }
  }

  const Image& first = ep.observations.front();
  LPS_CHECK(first.height > 0 && first.width > 0, "empty observation frame");
  for (const auto& obs : ep.observations) {
    LPS_CHECK(obs.same_shape(first), "ragged observation shapes within episode");
    LPS_CHECK(obs.data.size() == static_cast<size_t>(obs.height) * obs.width * 3,
              "observation byte count does not match its shape");
  }
}

}  // namespace lps::envs
