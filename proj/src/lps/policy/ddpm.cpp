#include "lps/policy/ddpm.hpp"

#include <cmath>

#include "lps/core/check.hpp"

namespace lps::policy {

DdpmSchedule DdpmSchedule::cosine(int64_t steps) {
  LPS_CHECK(steps >= 1, "diffusion schedule needs at least one step");
  DdpmSchedule s;
  s.steps = steps;
  s.alpha_bar.resize(steps + 1);
  s.beta.resize(steps);
  const double offset = 0.008;
  auto f = [&](double t) {
    const double v = std::cos((t / static_cast<double>(steps) + offset) / (1.0 + offset) *
                              M_PI / 2.0);
    return v * v;
  };
  const double f0 = f(0.0);
  for (int64_t t = 0; t <= steps; ++t) s.alpha_bar[t] = f(static_cast<double>(t)) / f0;
  for (int64_t t = 1; t <= steps; ++t) {
    const double b = 1.0 - s.alpha_bar[t] / s.alpha_bar[t - 1];
    s.beta[t - 1] = std::min(std::max(b, 1e-8), 0.999);
  }
  return s;
}

torch::Tensor DdpmSchedule::noised(torch::Tensor x0, torch::Tensor eps,
                                   torch::Tensor t_index) const {
  LPS_CHECK(t_index.dim() == 1 && t_index.size(0) == x0.size(0),
            "t_index must be [B] matching the batch");
  torch::Tensor ab = torch::empty({x0.size(0)}, torch::kFloat64);
  auto t_acc = t_index.accessor<int64_t, 1>();
  auto ab_acc = ab.accessor<double, 1>();
  for (int64_t i = 0; i < t_index.size(0); ++i) {
    const int64_t t = t_acc[i];
    LPS_CHECK(t >= 1 && t <= steps, "timestep out of range");
    ab_acc[i] = alpha_bar[t];
  }
  ab = ab.to(torch::kFloat32).unsqueeze(1);
  return ab.sqrt() * x0 + (1.0 - ab).sqrt() * eps;
}

torch::Tensor DdpmSchedule::reverse_step(torch::Tensor x_t, torch::Tensor eps_hat, int64_t t,
                                         torch::Tensor noise) const {
  LPS_CHECK(t >= 1 && t <= steps, "timestep out of range");
  const double ab_t = alpha_bar[t];
  const double ab_prev = alpha_bar[t - 1];
  const double beta_t = beta[t - 1];
  const double alpha_t = 1.0 - beta_t;
  torch::Tensor mean =
      (x_t - beta_t / std::sqrt(1.0 - ab_t) * eps_hat) / std::sqrt(alpha_t);
  if (t == 1) return mean;
  const double var = (1.0 - ab_prev) / (1.0 - ab_t) * beta_t;
  return mean + std::sqrt(var) * noise;
}

torch::Tensor timestep_embedding(torch::Tensor t_index, int64_t dim) {
  LPS_CHECK(dim % 2 == 0, "timestep embedding dim must be even");
  const int64_t half = dim / 2;
  torch::Tensor freqs =
      torch::exp(torch::arange(half, torch::kFloat32) * (-std::log(10000.0) / half));
  torch::Tensor args = t_index.to(torch::kFloat32).unsqueeze(1) * freqs.unsqueeze(0);
  return torch::cat({args.sin(), args.cos()}, 1);
}

}  // namespace lps::policy
