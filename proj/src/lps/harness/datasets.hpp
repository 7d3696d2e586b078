#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <utility>
#include <vector>

#include "lps/core/config.hpp"
#include "lps/core/rng.hpp"
#include "lps/steering/lps_trainer.hpp"
#include "lps/wm/world_model.hpp"

namespace lps::harness {

// One episode resident in memory: frames as uint8 [T+1, C, H, W], actions
// [T, A], rewards [T], and (when loaded with a flow cache) normalized flow
// [T, 2, H, W] stored at half precision.
struct EpisodeTensors {
  torch::Tensor frames_u8;
  torch::Tensor actions;
  torch::Tensor rewards;
  torch::Tensor flows;  // undefined unless loaded with flow
  int64_t length = 0;
};

// Shard loaded into tensors plus the batch samplers used by the training
// loops. Slices that run past an episode's end are padded with an absorbing
// rest state: frames repeat the final frame, actions and flow pad with
// zeros (no motion), rewards repeat the final reward. BC chunks instead
// repeat the final action, matching the policy's chunk convention.
class EpisodeDataset {
 public:
  static EpisodeDataset load(const std::filesystem::path& shard_dir,
                             const std::filesystem::path& flow_dir = {});

  int64_t size() const { return static_cast<int64_t>(episodes_.size()); }
  int64_t action_dim() const;
  int64_t frame_hw() const;
  bool has_flow() const;
  const EpisodeTensors& episode(int64_t index) const;
  const Config& manifest() const { return manifest_; }

  EpisodeDataset subset(const std::vector<int64_t>& indices) const;
  // Deterministic split: the last n_val episodes become the validation set.
  std::pair<EpisodeDataset, EpisodeDataset> split_validation(int64_t n_val) const;

  // World-model batch: obs [B, L+1, C, H, W] in [0,1], actions [B, L, A],
  // flows [B, L, 2, H, W] when requested.
  wm::WmBatch sample_sequences(int64_t batch, int64_t length, Rng& rng, bool with_flow) const;

  // Deterministic batch over the first min(batch, size) episodes, start 0.
  wm::WmBatch validation_batch(int64_t batch, int64_t length) const;

  struct ChunkBatch {
    torch::Tensor obs;     // [B, C, H, W]
    torch::Tensor chunks;  // [B, h, A]
  };
  ChunkBatch sample_chunks(int64_t batch, int64_t horizon, Rng& rng) const;

  steering::LpsBatch sample_slices(int64_t batch, int64_t horizon, Rng& rng) const;

  struct TransitionBatch {
    torch::Tensor obs, actions, rewards, next_obs, done;
  };
  TransitionBatch sample_transitions(int64_t batch, Rng& rng) const;

 private:
  std::vector<EpisodeTensors> episodes_;
  Config manifest_;
};

}  // namespace lps::harness
