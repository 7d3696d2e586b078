#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lps/core/config.hpp"
#include "lps/policy/ddpm.hpp"
#include "lps/wm/conv_nets.hpp"

namespace lps::policy {

// Behavior-cloned action-chunk policy: conv observation encoder plus either a
// conditional DDPM head (the steerable plan sampler) or a deterministic
// regressor head (for tests and debugging).
struct PolicyOptions {
  int64_t obs_hw = 64;
  int64_t obs_channels = 3;
  std::vector<int64_t> conv_channels = {8, 16, 32, 64};
  int64_t obs_embed = 128;
  int64_t horizon = 16;
  int64_t action_dim = 2;
  std::string head = "diffusion";  // "diffusion" | "regressor"
  int64_t denoise_steps = 50;
  int64_t hidden = 256;
  int64_t time_embed = 32;
  double action_bound = 1.0;

  int64_t chunk_dim() const { return horizon * action_dim; }
  void validate() const;
};

Config policy_options_to_config(const PolicyOptions& opts);
PolicyOptions policy_options_from_config(const Config& cfg);

struct DenoiserImpl : torch::nn::Module {
  DenoiserImpl(int64_t x_dim, int64_t cond_dim, int64_t time_dim, int64_t hidden);
  torch::Tensor forward(torch::Tensor x, torch::Tensor cond, torch::Tensor temb);
  torch::nn::Linear fc1{nullptr}, fc2{nullptr}, out{nullptr};
};
TORCH_MODULE(Denoiser);

struct BcPolicyImpl : torch::nn::Module {
  explicit BcPolicyImpl(PolicyOptions opts);

  torch::Tensor encode_obs(torch::Tensor obs);  // [B,3,H,W] -> [B, obs_embed]

  // Training loss for a batch of (obs, action chunk): denoising MSE for the
  // diffusion head, plain MSE for the regressor head. Per-sample losses are
  // kept so NaNs can be attributed to a batch index.
  struct Loss {
    torch::Tensor total;       // scalar
    torch::Tensor per_sample;  // [B]
  };
  Loss loss(torch::Tensor obs, torch::Tensor chunks,
            std::optional<at::Generator> gen = std::nullopt);

  // K plans for one observation, [K, h, action_dim], clipped to bounds.
  // Diffusion: K independent seeded reverse-diffusion samples. Regressor:
  // K identical deterministic outputs.
  torch::Tensor sample_plans(torch::Tensor obs, int64_t k, uint64_t seed);

  PolicyOptions options;
  DdpmSchedule schedule;
  wm::ConvEncoder obs_encoder{nullptr};
  Denoiser denoiser{nullptr};            // diffusion head
  torch::nn::Linear reg_hidden{nullptr}, reg_out{nullptr};  // regressor head
};
TORCH_MODULE(BcPolicy);

// One optimizer update; returns named scalars. Throws on non-finite loss
// with the offending batch index.
std::map<std::string, double> train_bc_step(BcPolicy& policy, torch::optim::Optimizer& optimizer,
                                            torch::Tensor obs, torch::Tensor chunks,
                                            std::optional<at::Generator> gen = std::nullopt);

// Length-h chunk starting at `start`, padded by repeating the final action
// past the episode tail.
std::vector<std::vector<float>> chunk_actions(const std::vector<std::vector<float>>& actions,
                                              int start, int horizon);

void save_policy(const BcPolicy& policy, const std::filesystem::path& path,
                 const std::map<std::string, std::string>& extra_manifest = {});
struct LoadedPolicy {
  BcPolicy model{nullptr};
  std::map<std::string, std::string> manifest;
};
LoadedPolicy load_policy(const std::filesystem::path& path);

}  // namespace lps::policy
