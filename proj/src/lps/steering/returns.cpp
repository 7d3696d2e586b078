#include "lps/steering/returns.hpp"

#include <cmath>

#include "lps/core/check.hpp"

namespace lps::steering {

std::vector<double> lambda_returns(const std::vector<double>& rewards,
                                   const std::vector<double>& values, double gamma,
                                   double lambda) {
  LPS_CHECK(!rewards.empty(), "lambda_returns: empty reward slice");
  LPS_CHECK(rewards.size() == values.size(), "lambda_returns: rewards/values length mismatch ("
                                                 << rewards.size() << " vs " << values.size()
                                                 << ")");
  LPS_CHECK(gamma >= 0.0 && gamma <= 1.0, "lambda_returns: gamma out of [0,1]: " << gamma);
  LPS_CHECK(lambda >= 0.0 && lambda <= 1.0, "lambda_returns: lambda out of [0,1]: " << lambda);
  const size_t n = rewards.size();
  std::vector<double> out(n);
  out[n - 1] = rewards[n - 1] + gamma * values[n - 1];
  for (size_t i = n - 1; i-- > 0;) {
    out[i] = rewards[i] + gamma * ((1.0 - lambda) * values[i] + lambda * out[i + 1]);
  }
  return out;
}

torch::Tensor lambda_returns_t(torch::Tensor rewards, torch::Tensor values, double gamma,
                               double lambda) {
  LPS_CHECK(rewards.dim() == 2, "lambda_returns_t: rewards must be [B, L]");
  LPS_CHECK(rewards.sizes() == values.sizes(), "lambda_returns_t: rewards/values shape mismatch");
  const int64_t length = rewards.size(1);
  LPS_CHECK(length >= 1, "lambda_returns_t: empty slice");
  rewards = rewards.to(torch::kFloat64);
  values = values.to(torch::kFloat64);
  auto out = torch::empty_like(rewards);
  out.select(1, length - 1) =
      rewards.select(1, length - 1) + gamma * values.select(1, length - 1);
  for (int64_t i = length - 2; i >= 0; --i) {
    out.select(1, i) = rewards.select(1, i) +
                       gamma * ((1.0 - lambda) * values.select(1, i) +
                                lambda * out.select(1, i + 1));
  }
  return out.to(torch::kFloat32);
}

torch::Tensor cosine_rows(torch::Tensor a, torch::Tensor b) {
  LPS_CHECK(a.dim() == 2 && a.sizes() == b.sizes(),
            "cosine_rows: expected matching [N, D] tensors");
  auto na = a.norm(2, /*dim=*/1);
  auto nb = b.norm(2, /*dim=*/1);
  const double min_norm = std::min(na.min().item<double>(), nb.min().item<double>());
  LPS_CHECK(min_norm > 1e-12, "cosine_rows: zero-norm feature row");
  return ((a * b).sum(1) / (na * nb)).clamp(-1.0, 1.0);
}

torch::Tensor shaped_rewards_t(torch::Tensor rewards, torch::Tensor expert_features,
                               torch::Tensor policy_features) {
  LPS_CHECK(rewards.dim() == 2, "shaped_rewards_t: rewards must be [B, L]");
  LPS_CHECK(expert_features.dim() == 3 && expert_features.sizes() == policy_features.sizes(),
            "shaped_rewards_t: feature tensors must match [B, L, D]");
  LPS_CHECK(expert_features.size(0) == rewards.size(0) &&
                expert_features.size(1) == rewards.size(1),
            "shaped_rewards_t: rewards/features leading dims mismatch");
  const int64_t batch = rewards.size(0);
  const int64_t length = rewards.size(1);
  const int64_t dim = expert_features.size(2);
  auto cos = cosine_rows(expert_features.reshape({batch * length, dim}),
                         policy_features.reshape({batch * length, dim}))
                 .reshape({batch, length});
  return rewards + (cos - 1.0) / 2.0;
}

double plan_score(const std::vector<double>& values, double gamma_s) {
  LPS_CHECK(!values.empty(), "plan_score: empty value sequence");
  LPS_CHECK(gamma_s > 0.0 && gamma_s <= 1.0, "plan_score: gamma_s out of (0,1]: " << gamma_s);
  const size_t h = values.size() - 1;
  double num = 0.0;
  double den = 0.0;
  for (size_t k = 0; k < values.size(); ++k) {
    const double w = std::pow(gamma_s, static_cast<double>(h - k));
    num += w * values[k];
    den += w;
  }
  return num / den;
}

torch::Tensor plan_score_t(torch::Tensor values, double gamma_s) {
  LPS_CHECK(values.dim() == 2 && values.size(1) >= 1, "plan_score_t: values must be [N, h+1]");
  LPS_CHECK(gamma_s > 0.0 && gamma_s <= 1.0, "plan_score_t: gamma_s out of (0,1]: " << gamma_s);
  const int64_t length = values.size(1);
  auto weights = torch::empty({length}, values.options().dtype(torch::kFloat64));
  for (int64_t k = 0; k < length; ++k) {
    weights[k] = std::pow(gamma_s, static_cast<double>(length - 1 - k));
  }
  auto scored = (values.to(torch::kFloat64) * weights.unsqueeze(0)).sum(1) / weights.sum();
  return scored.to(torch::kFloat32);
}

}  // namespace lps::steering
