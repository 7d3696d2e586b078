#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lps/flow/flow_field.hpp"

namespace lps::flow {

struct FlowCacheReport {
  int episodes = 0;
  int computed = 0;
  int cache_hits = 0;
  std::vector<int> skipped;  // corrupt episode records, listed in the manifest
};

// Precomputes per-step flow (frame t -> t+1, one field per action index) for
// every episode in a shard. Blobs are float16 [T, H, W, 2] with a
// content-hash sidecar keyed on the episode's frames and the estimator, so
// reruns are pure cache hits and edits invalidate precisely. Corrupt episode
// records are skipped with a warning and listed in the cache manifest.
// flow_dir defaults to <shard_dir>/flow when empty.
FlowCacheReport precompute_flow_shard(const std::filesystem::path& shard_dir,
                                      const std::string& estimator = "lk_pyramid",
                                      std::filesystem::path flow_dir = {});

// Flow fields of one episode, decoded from the cache blob.
std::vector<FlowField> read_flow_episode(const std::filesystem::path& flow_dir, int index);

std::filesystem::path default_flow_dir(const std::filesystem::path& shard_dir);

}  // namespace lps::flow
