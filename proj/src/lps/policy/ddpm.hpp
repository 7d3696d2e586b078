#pragma once

#include <torch/torch.h>

#include <vector>

namespace lps::policy {

// DDPM noise schedule with the cosine alpha-bar profile. Index convention:
// alpha_bar[t] is the signal fraction after t noising steps (alpha_bar[0] =
// 1), beta[t-1] is the variance added at step t, t in 1..steps.
struct DdpmSchedule {
  int64_t steps = 0;
  std::vector<double> alpha_bar;  // size steps+1
  std::vector<double> beta;       // size steps

  static DdpmSchedule cosine(int64_t steps);

  // q(x_t | x_0) sample: sqrt(ab_t) x0 + sqrt(1-ab_t) eps.
  torch::Tensor noised(torch::Tensor x0, torch::Tensor eps, torch::Tensor t_index) const;
  // One reverse (ancestral) step from x_t to x_{t-1} given predicted eps.
  torch::Tensor reverse_step(torch::Tensor x_t, torch::Tensor eps_hat, int64_t t,
                             torch::Tensor noise) const;
};

// Standard sinusoidal embedding of integer timesteps, [B] -> [B, dim].
torch::Tensor timestep_embedding(torch::Tensor t_index, int64_t dim);

}  // namespace lps::policy
