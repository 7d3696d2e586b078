#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lps/envs/episode.hpp"
#include "lps/envs/pointmass_env.hpp"

namespace lps::envs {

struct DemoStats {
  int attempts = 0;
  int discarded_short = 0;  // successful but shorter than the 3-step reward tail
  int failures = 0;
};

// Runs the scripted expert until n_episodes successes are collected. Every
// returned episode is successful with rewards 0,...,0,1,1,1. Ten consecutive
// expert failures abort: that signals a broken env/expert pairing, not bad
// luck. Deterministic in (cfg, task, seed, region).
std::vector<Episode> collect_demos(const EmbodimentConfig& cfg, const std::string& task,
                                   int n_episodes, uint64_t seed,
                                   SpawnRegion region = SpawnRegion::central(0.8),
                                   DemoStats* stats = nullptr);

// collect_demos + write_shard. The manifest records task/seed/region so
// downstream stages can key caches off shard provenance.
void generate_demos(const EmbodimentConfig& cfg, const std::string& task, int n_episodes,
                    uint64_t seed, const std::filesystem::path& out_dir,
                    SpawnRegion region = SpawnRegion::central(0.8),
                    const std::string& image_codec = "png");

}  // namespace lps::envs
