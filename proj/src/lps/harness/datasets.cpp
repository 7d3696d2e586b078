#include "lps/harness/datasets.hpp"

#include "lps/core/check.hpp"
#include "lps/envs/shard.hpp"
#include "lps/flow/flow_cache.hpp"
#include "lps/flow/flow_encoder.hpp"

namespace lps::harness {

namespace {

EpisodeTensors to_tensors(const envs::Episode& ep) {
  const int64_t t = ep.length();
  const int64_t h = ep.observations.front().height;
  const int64_t w = ep.observations.front().width;
  EpisodeTensors out;
  out.length = t;
  out.frames_u8 = torch::empty({t + 1, 3, h, w}, torch::kUInt8);
  for (int64_t i = 0; i <= t; ++i) {
    auto src = torch::from_blob(const_cast<uint8_t*>(ep.observations[i].data.data()),
                                {h, w, 3}, torch::kUInt8);
    out.frames_u8[i] = src.permute({2, 0, 1});
  }
  const int64_t adim = ep.action_dim();
  out.actions = torch::empty({t, adim}, torch::kFloat32);
  for (int64_t i = 0; i < t; ++i) {
    for (int64_t j = 0; j < adim; ++j) out.actions[i][j] = ep.actions[i][j];
  }
  out.rewards =
      torch::from_blob(const_cast<float*>(ep.rewards.data()), {t}, torch::kFloat32).clone();
  return out;
}

torch::Tensor frames_to_float(torch::Tensor frames_u8) {
  return frames_u8.to(torch::kFloat32).div(255.0);
}

}  // namespace

EpisodeDataset EpisodeDataset::load(const std::filesystem::path& shard_dir,
                                    const std::filesystem::path& flow_dir) {
  auto shard = envs::read_shard(shard_dir);
  LPS_CHECK(!shard.episodes.empty(), "EpisodeDataset: empty shard " << shard_dir.string());
  EpisodeDataset ds;
  ds.manifest_ = shard.manifest;
  ds.episodes_.reserve(shard.episodes.size());
  for (size_t i = 0; i < shard.episodes.size(); ++i) {
    auto tensors = to_tensors(shard.episodes[i]);
    if (!flow_dir.empty()) {
      auto fields = flow::read_flow_episode(flow_dir, static_cast<int>(i));
      LPS_CHECK(static_cast<int64_t>(fields.size()) == tensors.length,
                "EpisodeDataset: flow blob length " << fields.size() << " != episode length "
                                                    << tensors.length << " (episode " << i
                                                    << ")");
      std::vector<torch::Tensor> steps;
      steps.reserve(fields.size());
      for (const auto& field : fields) steps.push_back(flow::flow_to_tensor(field));
      tensors.flows = torch::stack(steps, 0).to(torch::kHalf);
    }
    ds.episodes_.push_back(std::move(tensors));
  }
  return ds;
}

int64_t EpisodeDataset::action_dim() const {
  LPS_CHECK(!episodes_.empty(), "EpisodeDataset: empty");
  return episodes_.front().actions.size(1);
}

int64_t EpisodeDataset::frame_hw() const {
  LPS_CHECK(!episodes_.empty(), "EpisodeDataset: empty");
  return episodes_.front().frames_u8.size(2);
}

bool EpisodeDataset::has_flow() const {
  return !episodes_.empty() && episodes_.front().flows.defined();
}

const EpisodeTensors& EpisodeDataset::episode(int64_t index) const {
  LPS_CHECK(index >= 0 && index < size(), "EpisodeDataset: index " << index << " out of range");
  return episodes_[index];
}

EpisodeDataset EpisodeDataset::subset(const std::vector<int64_t>& indices) const {
  LPS_CHECK(!indices.empty(), "EpisodeDataset::subset: empty index list");
  EpisodeDataset out;
  out.manifest_ = manifest_;
  for (int64_t i : indices) out.episodes_.push_back(episode(i));
  return out;
}

std::pair<EpisodeDataset, EpisodeDataset> EpisodeDataset::split_validation(int64_t n_val) const {
  LPS_CHECK(n_val >= 1 && n_val < size(),
            "EpisodeDataset::split_validation: n_val " << n_val << " out of range for " << size()
                                                       << " episodes");
  std::vector<int64_t> train_idx, val_idx;
  for (int64_t i = 0; i < size() - n_val; ++i) train_idx.push_back(i);
  for (int64_t i = size() - n_val; i < size(); ++i) val_idx.push_back(i);
  return {subset(train_idx), subset(val_idx)};
}

wm::WmBatch EpisodeDataset::sample_sequences(int64_t batch, int64_t length, Rng& rng,
                                             bool with_flow) const {
  LPS_CHECK(batch >= 1 && length >= 1, "sample_sequences: bad batch/length");
  LPS_CHECK(!with_flow || has_flow(), "sample_sequences: dataset loaded without flow");
  std::vector<torch::Tensor> obs, actions, flows;
  for (int64_t b = 0; b < batch; ++b) {
    const auto& ep = episodes_[rng.uniform_int(static_cast<uint64_t>(size()))];
    const int64_t t = ep.length;
    const int64_t start =
        t >= length ? static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(t - length + 1)))
                    : 0;
    std::vector<torch::Tensor> frames, acts, flws;
    for (int64_t j = 0; j <= length; ++j) frames.push_back(ep.frames_u8[std::min(start + j, t)]);
    for (int64_t j = 0; j < length; ++j) {
      const int64_t step = start + j;
      if (step < t) {
        acts.push_back(ep.actions[step]);
        if (with_flow) flws.push_back(ep.flows[step].to(torch::kFloat32));
      } else {
        acts.push_back(torch::zeros_like(ep.actions[0]));
        if (with_flow) flws.push_back(torch::zeros_like(ep.flows[0].to(torch::kFloat32)));
      }
    }
    obs.push_back(frames_to_float(torch::stack(frames, 0)));
    actions.push_back(torch::stack(acts, 0));
    if (with_flow) flows.push_back(torch::stack(flws, 0));
  }
  wm::WmBatch out;
  out.obs = torch::stack(obs, 0);
  out.actions = torch::stack(actions, 0);
  if (with_flow) out.flows = torch::stack(flows, 0);
  return out;
}

wm::WmBatch EpisodeDataset::validation_batch(int64_t batch, int64_t length) const {
  LPS_CHECK(batch >= 1 && length >= 1, "validation_batch: bad batch/length");
  const int64_t n = std::min(batch, size());
  std::vector<torch::Tensor> obs, actions;
  for (int64_t b = 0; b < n; ++b) {
    const auto& ep = episodes_[b];
    const int64_t t = ep.length;
    std::vector<torch::Tensor> frames, acts;
    for (int64_t j = 0; j <= length; ++j) frames.push_back(ep.frames_u8[std::min(j, t)]);
    for (int64_t j = 0; j < length; ++j) {
      acts.push_back(j < t ? ep.actions[j] : torch::zeros_like(ep.actions[0]));
    }
    obs.push_back(frames_to_float(torch::stack(frames, 0)));
    actions.push_back(torch::stack(acts, 0));
  }
  wm::WmBatch out;
  out.obs = torch::stack(obs, 0);
  out.actions = torch::stack(actions, 0);
  return out;
}

EpisodeDataset::ChunkBatch EpisodeDataset::sample_chunks(int64_t batch, int64_t horizon,
                                                         Rng& rng) const {
  LPS_CHECK(batch >= 1 && horizon >= 1, "sample_chunks: bad batch/horizon");
  std::vector<torch::Tensor> obs, chunks;
  for (int64_t b = 0; b < batch; ++b) {
    const auto& ep = episodes_[rng.uniform_int(static_cast<uint64_t>(size()))];
    const int64_t t = ep.length;
    const int64_t start = static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(t)));
    obs.push_back(frames_to_float(ep.frames_u8[start]));
    std::vector<torch::Tensor> acts;
    for (int64_t j = 0; j < horizon; ++j) {
      acts.push_back(ep.actions[std::min(start + j, t - 1)]);
    }
    chunks.push_back(torch::stack(acts, 0));
  }
  return ChunkBatch{torch::stack(obs, 0), torch::stack(chunks, 0)};
}

steering::LpsBatch EpisodeDataset::sample_slices(int64_t batch, int64_t horizon, Rng& rng) const {
  LPS_CHECK(batch >= 1 && horizon >= 1, "sample_slices: bad batch/horizon");
  std::vector<torch::Tensor> obs, actions, rewards;
  for (int64_t b = 0; b < batch; ++b) {
    const auto& ep = episodes_[rng.uniform_int(static_cast<uint64_t>(size()))];
    const int64_t t = ep.length;
    const int64_t start = static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(t)));
    std::vector<torch::Tensor> frames, acts, rews;
    for (int64_t j = 0; j <= horizon; ++j) frames.push_back(ep.frames_u8[std::min(start + j, t)]);
    for (int64_t j = 0; j < horizon; ++j) {
      const int64_t step = start + j;
      acts.push_back(step < t ? ep.actions[step] : torch::zeros_like(ep.actions[0]));
      rews.push_back(ep.rewards[std::min(step, t - 1)]);
    }
    obs.push_back(frames_to_float(torch::stack(frames, 0)));
    actions.push_back(torch::stack(acts, 0));
    rewards.push_back(torch::stack(rews, 0));
  }
  steering::LpsBatch out;
  out.obs_seq = torch::stack(obs, 0);
  out.actions = torch::stack(actions, 0);
  out.rewards = torch::stack(rewards, 0);
  return out;
}

EpisodeDataset::TransitionBatch EpisodeDataset::sample_transitions(int64_t batch,
                                                                   Rng& rng) const {
  LPS_CHECK(batch >= 1, "sample_transitions: bad batch");
  std::vector<torch::Tensor> obs, actions, next_obs;
  std::vector<float> rewards, done;
  for (int64_t b = 0; b < batch; ++b) {
    const auto& ep = episodes_[rng.uniform_int(static_cast<uint64_t>(size()))];
    const int64_t t = ep.length;
    const int64_t step = static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(t)));
    obs.push_back(frames_to_float(ep.frames_u8[step]));
    next_obs.push_back(frames_to_float(ep.frames_u8[step + 1]));
    actions.push_back(ep.actions[step]);
    rewards.push_back(ep.rewards[step].item<float>());
    done.push_back(step == t - 1 ? 1.0f : 0.0f);
  }
  TransitionBatch out;
  out.obs = torch::stack(obs, 0);
  out.actions = torch::stack(actions, 0);
  out.next_obs = torch::stack(next_obs, 0);
  out.rewards = torch::tensor(rewards, torch::kFloat32);
  out.done = torch::tensor(done, torch::kFloat32);
  return out;
}

}  // namespace lps::harness
