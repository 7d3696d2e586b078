#pragma once

#include <torch/torch.h>

#include <vector>

namespace lps::steering {

// TD(lambda) returns over an L-step slice.
//
// Index convention: rewards[i] is the reward of step i, and values[i] is the
// value of the SUCCESSOR state of step i (the state the step lands in), so a
// slice with states s_0..s_L pairs rewards r_0..r_{L-1} with values
// V(s_1)..V(s_L). The recursion, from the back:
//   R_{L-1} = r_{L-1} + gamma * v_{L-1}
//   R_i     = r_i + gamma * ((1 - lambda) * v_i + lambda * R_{i+1})
// lambda=0 gives one-step TD targets r_i + gamma*v_i; lambda=1 gives the
// Monte-Carlo return bootstrapped at the final value.
std::vector<double> lambda_returns(const std::vector<double>& rewards,
                                   const std::vector<double>& values, double gamma,
                                   double lambda);

// Batched variant: rewards/values [B, L] -> returns [B, L].
torch::Tensor lambda_returns_t(torch::Tensor rewards, torch::Tensor values, double gamma,
                               double lambda);

// Row-wise cosine similarity of feature matrices [N, D]; errors on zero-norm
// rows (degenerate latents).
torch::Tensor cosine_rows(torch::Tensor a, torch::Tensor b);

// r'_i = r_i + (cos(expert_i, policy_i) - 1) / 2, elementwise over [B, L]
// rewards with [B, L, D] feature tensors. Bounds: r_i - 1 <= r'_i <= r_i,
// with equality to r_i iff the features align exactly.
torch::Tensor shaped_rewards_t(torch::Tensor rewards, torch::Tensor expert_features,
                               torch::Tensor policy_features);

// Weighted mean of per-state values with weights w_k = gamma_s^(h-k),
// k = 0..h: the last (most future) state weighs 1, earlier states decay.
double plan_score(const std::vector<double>& values, double gamma_s);

// Batched variant: values [N, h+1] -> scores [N].
torch::Tensor plan_score_t(torch::Tensor values, double gamma_s);

}  // namespace lps::steering
