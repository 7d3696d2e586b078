#include "lps/envs/demo_gen.hpp"

#include "lps/core/check.hpp"
#include "lps/core/hash.hpp"
#include "lps/envs/shard.hpp"

namespace lps::envs {

std::vector<Episode> collect_demos(const EmbodimentConfig& cfg, const std::string& task,
                                   int n_episodes, uint64_t seed, SpawnRegion region,
                                   DemoStats* stats) {
  LPS_CHECK(n_episodes >= 1, "n_episodes must be >= 1");
  const EmbodimentConfig task_cfg = for_task(cfg, task);

  std::vector<Episode> demos;
  demos.reserve(n_episodes);
  DemoStats local;
  int consecutive_failures = 0;

  while (static_cast<int>(demos.size()) < n_episodes) {
    const uint64_t ep_seed = derive_seed(seed, "demo", static_cast<uint64_t>(local.attempts));
    ++local.attempts;
    PointmassEnv env(task_cfg, task, ep_seed, region);

    Episode ep;
    ep.embodiment_id = task_cfg.embodiment_id;
    ep.observations.push_back(env.reset());
    bool success = false;
    while (!env.done()) {
      const Vec2 a = env.expert_action();
      auto result = env.step(a);
      ep.actions.push_back({static_cast<float>(a.x), static_cast<float>(a.y)});
      ep.observations.push_back(std::move(result.obs));
      success = result.success;
    }

    const int t = static_cast<int>(ep.actions.size());
    if (!success) {
      ++local.failures;
      ++consecutive_failures;
      LPS_CHECK(consecutive_failures < 10,
                "expert failed 10 consecutive episodes on task '" + task + "', embodiment '" +
                    task_cfg.embodiment_id + "' (attempt " + std::to_string(local.attempts) +
                    "): env/expert misconfiguration");
      continue;
    }
    consecutive_failures = 0;
    if (t < 3) {
      // Too short to carry the 3-step reward tail.
      ++local.discarded_short;
      continue;
    }

    ep.success = true;
    ep.rewards.assign(t, 0.0f);
    for (int i = t - 3; i < t; ++i) ep.rewards[i] = 1.0f;
    check_episode(ep);
    demos.push_back(std::move(ep));
  }

  if (stats != nullptr) *stats = local;
  return demos;
}

void generate_demos(const EmbodimentConfig& cfg, const std::string& task, int n_episodes,
                    uint64_t seed, const std::filesystem::path& out_dir, SpawnRegion region,
                    const std::string& image_codec) {
  const std::vector<Episode> demos = collect_demos(cfg, task, n_episodes, seed, region);
  Config manifest;
  manifest.set("task", task);
  manifest.set("seed", static_cast<int64_t>(seed));
  manifest.set("spawn_lo", region.lo);
  manifest.set("spawn_hi", region.hi);
  write_shard(out_dir, demos, manifest, image_codec);
}

}  // namespace lps::envs
