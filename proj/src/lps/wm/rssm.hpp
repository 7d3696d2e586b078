#pragma once

#include <torch/torch.h>

#include <optional>
#include <vector>

namespace lps::wm {

enum class SampleMode { kSample, kMode };

// Recurrent state-space latent: deterministic GRU path plus grouped
// categorical stochastics. feature() is the s_t vector all downstream
// steering consumes.
struct LatentState {
  torch::Tensor deter;  // [B, deter_dim]
  torch::Tensor probs;  // [B, G, C], per-group simplex (unimix applied)
  torch::Tensor stoch;  // [B, G, C], straight-through one-hot sample (or mode)

  torch::Tensor feature() const;  // [B, deter_dim + G*C]
  LatentState detached() const;
  int64_t batch() const { return deter.size(0); }
};

struct RssmOptions {
  int64_t deter_dim = 256;
  int64_t stoch_groups = 8;
  int64_t stoch_classes = 8;
  int64_t hidden_dim = 256;
  int64_t action_input_dim = 2;
  int64_t embed_dim = 256;
  double unimix = 0.01;      // uniform mixture weight on categorical probs
  double free_nats = 1.0;    // per-group KL floor
  double dyn_scale = 0.5;    // KL(sg(post) || prior) weight
  double rep_scale = 0.1;    // KL(post || sg(prior)) weight

  int64_t stoch_flat() const { return stoch_groups * stoch_classes; }
  int64_t feature_dim() const { return deter_dim + stoch_flat(); }
  void validate() const;
};

struct KlLosses {
  torch::Tensor dyn;    // scalar, free-bits-clipped, stop-grad on posterior
  torch::Tensor rep;    // scalar, free-bits-clipped, stop-grad on prior
  torch::Tensor total;  // dyn_scale*dyn + rep_scale*rep
  torch::Tensor raw_per_sample;  // [B], unclipped KL(post || prior) summed over groups
};

struct RssmImpl : torch::nn::Module {
  explicit RssmImpl(RssmOptions options);

  LatentState initial(int64_t batch) const;

  // One recurrent step conditioned on observation embedding. The returned
  // posterior and prior share the deter tensor bitwise.
  std::pair<LatentState, LatentState> observe(const LatentState& prev, torch::Tensor action_input,
                                              torch::Tensor embed, SampleMode mode,
                                              std::optional<at::Generator> gen = std::nullopt);

  // One prior-only step (latent imagination).
  LatentState imagine(const LatentState& prev, torch::Tensor action_input, SampleMode mode,
                      std::optional<at::Generator> gen = std::nullopt);

  // [s0, s1, ..., sh]: h+1 states, the input state included. action_inputs is
  // [B, h, action_input_dim]; h=0 yields {s0}.
  std::vector<LatentState> rollout(const LatentState& s0, torch::Tensor action_inputs,
                                   SampleMode mode,
                                   std::optional<at::Generator> gen = std::nullopt);

  // DreamerV3-style balanced two-sided KL with a per-group free-bits floor.
  KlLosses kl_loss(const LatentState& post, const LatentState& prior) const;

  RssmOptions options;
  torch::nn::Linear input_proj{nullptr};  // [stoch_flat + action] -> hidden
  torch::nn::GRUCell cell{nullptr};
  torch::nn::Linear prior_hidden{nullptr}, prior_logits{nullptr};
  torch::nn::Linear post_hidden{nullptr}, post_logits{nullptr};

 private:
  torch::Tensor deter_step(const LatentState& prev, torch::Tensor action_input);
  torch::Tensor probs_from_logits(torch::Tensor logits) const;  // unimix simplex
  torch::Tensor sample_stoch(torch::Tensor probs, SampleMode mode,
                             std::optional<at::Generator>& gen) const;
};
TORCH_MODULE(Rssm);

// Per-group categorical KL, [B, G]; both inputs are probability tensors.
torch::Tensor categorical_kl(torch::Tensor p, torch::Tensor q);

}  // namespace lps::wm
