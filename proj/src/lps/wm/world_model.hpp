#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lps/core/config.hpp"
#include "lps/core/image.hpp"
#include "lps/core/tensor_io.hpp"
#include "lps/flow/flow_encoder.hpp"
#include "lps/wm/conv_nets.hpp"
#include "lps/wm/rssm.hpp"

namespace lps::wm {

// Architecture of the recurrent-state-space world model. The action source
// is part of the architecture: "flow" routes precomputed optic flow through
// a trainable flow encoder (pretraining); "raw" feeds robot actions through
// a linear embedding (finetuning and all inference).
struct WorldModelOptions {
  int64_t obs_hw = 64;
  int64_t obs_channels = 3;
  std::vector<int64_t> conv_channels = {8, 16, 32, 64};
  int64_t embed_dim = 256;
  int64_t action_dim = 2;
  std::string action_source = "flow";
  RssmOptions rssm;
  flow::FlowEncoderParams flow_params;

  // Propagates shared dims (embed, action, frame size) into sub-configs.
  void finalize();
  void validate() const;
  int64_t feature_dim() const { return rssm.feature_dim(); }
};

Config wm_options_to_config(const WorldModelOptions& opts);
WorldModelOptions wm_options_from_config(const Config& cfg);

struct WorldModelImpl : torch::nn::Module {
  explicit WorldModelImpl(WorldModelOptions opts);

  bool flow_mode() const { return options.action_source == "flow"; }

  // [B, 3, H, W] float in [0,1] -> [B, embed_dim].
  torch::Tensor encode_obs(torch::Tensor obs);
  // [B, feature_dim] -> [B, 3, H, W] image logits.
  torch::Tensor decode_feature(torch::Tensor feature);
  // Raw robot actions [B, h, action_dim] -> rssm action inputs (raw mode only).
  torch::Tensor embed_raw_actions(torch::Tensor actions);
  // Normalized flow stack [N, 2, H, W] -> [N, action_dim] (flow mode only).
  torch::Tensor embed_flow(torch::Tensor flows);

  // Fresh single-frame posterior: the W.encode(x_t) used at every replan and
  // at Algorithm 1 line 8. Starts from the zero initial state with a zero
  // action input, so train- and inference-time state distributions match.
  LatentState encode_state(torch::Tensor obs, SampleMode mode,
                           std::optional<at::Generator> gen = std::nullopt);

  // Latent rollout under raw actions [B, h, action_dim] -> h+1 states
  // including s0. The workhorse of plan scoring.
  std::vector<LatentState> rollout_raw(const LatentState& s0, torch::Tensor actions,
                                       SampleMode mode,
                                       std::optional<at::Generator> gen = std::nullopt);

  WorldModelOptions options;
  ConvEncoder encoder{nullptr};
  ConvDecoder decoder{nullptr};
  Rssm rssm{nullptr};
  flow::FlowEncoder flow_encoder{nullptr};  // registered only when action_source == "flow"
  torch::nn::Linear raw_embed{nullptr};     // always present; trained only in raw mode
};
TORCH_MODULE(WorldModel);

// One sequence batch. obs is [B, L+1, 3, H, W] in [0,1]; actions is
// [B, L, action_dim] (raw mode); flows is [B, L, 2, H, W] normalized
// displacements (flow mode). Step index t moves frame t to frame t+1.
struct WmBatch {
  torch::Tensor obs;
  torch::Tensor actions;
  torch::Tensor flows;
};

// One optimizer update of the full model (encoder, rssm, decoder, and the
// active action embedder). Returns named scalars: loss, recon, recon_mae,
// kl, kl_dyn, kl_rep. Throws on non-finite loss, naming the batch index.
std::map<std::string, double> wm_train_step(WorldModel& wm, torch::optim::Optimizer& optimizer,
                                            const WmBatch& batch);

// Validation-only pass (no update); same scalars.
std::map<std::string, double> wm_eval_loss(WorldModel& wm, const WmBatch& batch);

// Raw-action twin with all non-action-input weights carried over bitwise.
// The flow encoder is dropped; the raw embedding stays at its (never
// trained) construction-time initialization.
WorldModel finetune_swap(const WorldModel& pretrained, int64_t target_action_dim);

void save_world_model(const WorldModel& wm, const std::filesystem::path& path,
                      const std::map<std::string, std::string>& extra_manifest = {});
struct LoadedWorldModel {
  WorldModel model{nullptr};
  std::map<std::string, std::string> manifest;
};
LoadedWorldModel load_world_model(const std::filesystem::path& path);

// Pixel <-> tensor helpers shared by datasets and evaluation.
torch::Tensor obs_to_tensor(const Image& img);          // [3, H, W] float in [0,1]
Image tensor_to_image(torch::Tensor chw);               // clamps to [0,1]

}  // namespace lps::wm
