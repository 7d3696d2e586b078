#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "lps/core/check.hpp"
#include "lps/core/fs_util.hpp"
#include "lps/core/hash.hpp"
#include "lps/envs/demo_gen.hpp"
#include "lps/envs/embodiment.hpp"
#include "lps/envs/episode.hpp"
#include "lps/envs/pointmass_env.hpp"
#include "lps/envs/shard.hpp"

namespace lps::envs {
namespace {

std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("lps_envs_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TEST(Embodiment, StockConfigsAndPool) {
  for (const auto& id : {"identity", "gain2x", "rot90", "barbot", "heldout"}) {
    auto cfg = stock_embodiment(id);
    EXPECT_EQ(cfg.embodiment_id, id);
    EXPECT_NO_THROW(cfg.validate());
  }
  EXPECT_THROW(stock_embodiment("nonexistent"), Error);

  auto ids = pool_embodiment_ids();
  EXPECT_EQ(ids.size(), 4u);
  EXPECT_EQ(std::count(ids.begin(), ids.end(), "heldout"), 0);
  std::vector<EmbodimentConfig> pool;
  for (const auto& id : ids) pool.push_back(stock_embodiment(id));
  EXPECT_NO_THROW(validate_pool(pool));
  pool.push_back(stock_embodiment(ids[0]));
  pool.back().embodiment_id = "copycat";  // same dynamics+sprite, new name
  EXPECT_THROW(validate_pool(pool), Error);
}

TEST(Embodiment, TaskCaps) {
  EXPECT_EQ(for_task(stock_embodiment("identity"), "reach").max_steps, 60);
  EXPECT_EQ(for_task(stock_embodiment("identity"), "push").max_steps, 100);
  EXPECT_THROW(for_task(stock_embodiment("identity"), "juggle"), Error);
}

TEST(Embodiment, VelocityRoundTrip) {
  for (const auto& id : pool_embodiment_ids()) {
    auto cfg = stock_embodiment(id);
    for (double x : {-0.8, -0.2, 0.0, 0.5}) {
      for (double y : {-0.6, 0.3, 0.9}) {
        Vec2 a{x, y};
        Vec2 back = cfg.action_from_world_velocity(cfg.world_velocity(a));
        EXPECT_NEAR(back.x, a.x, 1e-9) << id;
        EXPECT_NEAR(back.y, a.y, 1e-9) << id;
      }
    }
  }
}

TEST(SpawnRegionTest, CentralFraction) {
  auto r = SpawnRegion::central(0.8);
  EXPECT_NEAR(r.lo, 0.1, 1e-12);
  EXPECT_NEAR(r.hi, 0.9, 1e-12);
  auto f = SpawnRegion::full();
  EXPECT_EQ(f.lo, 0.0);
  EXPECT_EQ(f.hi, 1.0);
}

TEST(PointmassEnvTest, DeterministicUnderSeed) {
  auto cfg = for_task(stock_embodiment("identity"), "reach");
  PointmassEnv a(cfg, "reach", 7), b(cfg, "reach", 7), c(cfg, "reach", 8);
  auto fa = a.reset(), fb = b.reset(), fc = c.reset();
  EXPECT_EQ(fa.data, fb.data);
  EXPECT_NE(fa.data, fc.data);
  for (int i = 0; i < 5; ++i) {
    auto ra = a.step({0.3, -0.2});
    auto rb = b.step({0.3, -0.2});
    EXPECT_EQ(ra.obs.data, rb.obs.data);
    EXPECT_EQ(ra.success, rb.success);
  }
}

TEST(PointmassEnvTest, ZeroActionIsFixedPoint) {
  auto cfg = for_task(stock_embodiment("identity"), "reach");
  PointmassEnv env(cfg, "reach", 3);
  env.reset();
  const Vec2 start = env.agent();
  PointmassEnv::StepResult r;
  for (int i = 0; i < cfg.max_steps; ++i) {
    r = env.step({0.0, 0.0});
    EXPECT_EQ(env.agent().x, start.x);
    EXPECT_EQ(env.agent().y, start.y);
  }
  EXPECT_TRUE(r.done);
  EXPECT_FALSE(r.success);
  EXPECT_THROW(env.step({0.0, 0.0}), Error);
}

TEST(PointmassEnvTest, RejectsNonFiniteActionsClipsLargeOnes) {
  auto cfg = for_task(stock_embodiment("identity"), "reach");
  PointmassEnv env(cfg, "reach", 3);
  env.reset();
  EXPECT_THROW(env.step({std::nan(""), 0.0}), Error);
  EXPECT_THROW(env.step({0.0, std::numeric_limits<double>::infinity()}), Error);
  // A huge action moves exactly as far as the clipped unit action.
  PointmassEnv e1(cfg, "reach", 9), e2(cfg, "reach", 9);
  e1.reset();
  e2.reset();
  e1.step({100.0, 0.0});
  e2.step({1.0, 0.0});
  EXPECT_EQ(e1.agent().x, e2.agent().x);
}

TEST(PointmassEnvTest, ExpertReachesGoalReach) {
  auto cfg = for_task(stock_embodiment("heldout"), "reach");
  int successes = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    PointmassEnv env(cfg, "reach", seed);
    env.reset();
    bool ok = false;
    while (!env.done()) {
      auto r = env.step(env.expert_action());
      ok |= r.success;
    }
    successes += ok;
  }
  EXPECT_GE(successes, 99);
}

TEST(PointmassEnvTest, ExpertReachesGoalPush) {
  auto cfg = for_task(stock_embodiment("heldout"), "push");
  int successes = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    PointmassEnv env(cfg, "push", seed);
    env.reset();
    bool ok = false;
    while (!env.done()) {
      auto r = env.step(env.expert_action());
      ok |= r.success;
    }
    successes += ok;
  }
  EXPECT_GE(successes, 95);
}

TEST(PointmassEnvTest, ExpertActionFrameInverse) {
  // Same world state under identity vs rot90: the rot90 expert action equals
  // the identity action rotated by -pi/2 (compensating the embodiment frame).
  auto id_cfg = for_task(stock_embodiment("identity"), "reach");
  auto rot_cfg = id_cfg;
  rot_cfg.embodiment_id = "rot";
  rot_cfg.action_rotation = M_PI / 2.0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    PointmassEnv a(id_cfg, "reach", seed), b(rot_cfg, "reach", seed);
    a.reset();
    b.reset();
    ASSERT_EQ(a.agent().x, b.agent().x);  // same seed, same layout
    Vec2 ea = a.expert_action();
    Vec2 eb = b.expert_action();
    const double c = std::cos(-M_PI / 2.0), s = std::sin(-M_PI / 2.0);
    Vec2 rotated{c * ea.x - s * ea.y, s * ea.x + c * ea.y};
    EXPECT_NEAR(eb.x, rotated.x, 1e-6);
    EXPECT_NEAR(eb.y, rotated.y, 1e-6);
  }
}

TEST(PointmassEnvTest, ExpertNearGoalIsSmall) {
  auto cfg = for_task(stock_embodiment("identity"), "reach");
  PointmassEnv env(cfg, "reach", 11);
  env.reset();
  while (!env.done()) {
    auto r = env.step(env.expert_action());
    if (r.success) break;
  }
  if (!env.done()) {
    Vec2 a = env.expert_action();
    EXPECT_LT(a.norm(), 0.05);
  }
}

TEST(EpisodeTest, CheckEpisodeAcceptsAndRejects) {
  auto cfg = for_task(stock_embodiment("identity"), "reach");
  auto eps = collect_demos(cfg, "reach", 3, 21);
  ASSERT_EQ(eps.size(), 3u);
  for (const auto& ep : eps) EXPECT_NO_THROW(check_episode(ep));

  Episode bad = eps[0];
  bad.rewards[0] = 0.5f;  // non-binary
  EXPECT_THROW(check_episode(bad), Error);

  bad = eps[0];
  bad.rewards.back() = 0.0f;  // success flag but broken tail
  EXPECT_THROW(check_episode(bad), Error);

  bad = eps[0];
  bad.observations.pop_back();  // T frames instead of T+1
  EXPECT_THROW(check_episode(bad), Error);

  bad = eps[0];
  bad.actions[0][0] = 2.0f;  // out of bounds
  EXPECT_THROW(check_episode(bad), Error);
}

TEST(EpisodeTest, InvariantsOverManyEpisodes) {
  int checked = 0;
  for (const auto& id : {"identity", "heldout"}) {
    for (const auto& task : {"reach", "push"}) {
      auto cfg = for_task(stock_embodiment(id), task);
      auto eps = collect_demos(cfg, task, 30, fnv1a64(std::string(id) + task));
      for (const auto& ep : eps) {
        check_episode(ep);
        EXPECT_TRUE(ep.success);
        EXPECT_EQ(ep.embodiment_id, id);
        ASSERT_GE(ep.length(), 3);
        for (int i = 0; i < ep.length() - 3; ++i) EXPECT_EQ(ep.rewards[i], 0.0f);
        for (int i = ep.length() - 3; i < ep.length(); ++i) EXPECT_EQ(ep.rewards[i], 1.0f);
        EXPECT_EQ(ep.observations.size(), static_cast<size_t>(ep.length()) + 1);
        EXPECT_EQ(ep.observations[0].height, 64);
        EXPECT_EQ(ep.observations[0].width, 64);
        ++checked;
      }
    }
  }
  EXPECT_GE(checked, 100);
}

TEST(DemoGen, StatsAndDeterminism) {
  auto cfg = for_task(stock_embodiment("identity"), "push");
  DemoStats s1, s2;
  auto a = collect_demos(cfg, "push", 5, 77, SpawnRegion::central(0.8), &s1);
  auto b = collect_demos(cfg, "push", 5, 77, SpawnRegion::central(0.8), &s2);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(s1.attempts, s2.attempts);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].actions, b[i].actions);
    EXPECT_EQ(a[i].rewards, b[i].rewards);
    for (size_t t = 0; t < a[i].observations.size(); ++t) {
      EXPECT_EQ(a[i].observations[t].data, b[i].observations[t].data);
    }
  }
}

TEST(ShardTest, RoundTripAndByteDeterminism) {
  auto cfg = for_task(stock_embodiment("identity"), "reach");
  auto eps = collect_demos(cfg, "reach", 4, 5);
  auto d1 = temp_dir("shard1");
  auto d2 = temp_dir("shard2");
  Config extra;
  extra.set("task", std::string("reach"));
  write_shard(d1 / "shard", eps, extra, "png");
  write_shard(d2 / "shard", eps, extra, "png");

  auto shard = read_shard(d1 / "shard");
  ASSERT_EQ(shard.episodes.size(), eps.size());
  for (size_t i = 0; i < eps.size(); ++i) {
    EXPECT_EQ(shard.episodes[i].actions, eps[i].actions);
    EXPECT_EQ(shard.episodes[i].rewards, eps[i].rewards);
    EXPECT_EQ(shard.episodes[i].embodiment_id, eps[i].embodiment_id);
    EXPECT_EQ(shard.episodes[i].success, eps[i].success);
    for (size_t t = 0; t < eps[i].observations.size(); ++t) {
      EXPECT_EQ(shard.episodes[i].observations[t].data, eps[i].observations[t].data);
    }
  }

  // Byte-identical files across runs.
  for (const auto& entry : std::filesystem::recursive_directory_iterator(d1 / "shard")) {
    if (!entry.is_regular_file()) continue;
    auto rel = std::filesystem::relative(entry.path(), d1 / "shard");
    EXPECT_EQ(read_bytes(entry.path()), read_bytes(d2 / "shard" / rel)) << rel;
  }
}

TEST(ShardTest, GenerateDemosWritesManifest) {
  auto dir = temp_dir("gen");
  auto cfg = for_task(stock_embodiment("heldout"), "reach");
  generate_demos(cfg, "reach", 2, 31, dir / "shard", SpawnRegion::central(0.8), "png");
  auto manifest = read_shard_manifest(dir / "shard");
  EXPECT_EQ(manifest.integer("n_episodes"), 2);
  EXPECT_EQ(manifest.str("task"), "reach");
  EXPECT_EQ(manifest.str("embodiment_id"), "heldout");
  auto shard = read_shard(dir / "shard");
  ASSERT_EQ(shard.episodes.size(), 2u);
  EXPECT_TRUE(shard.episodes[0].success);
}

TEST(ShardTest, SingleEpisodeReadMatches) {
  auto dir = temp_dir("single");
  auto cfg = for_task(stock_embodiment("identity"), "reach");
  auto eps = collect_demos(cfg, "reach", 3, 13);
  Config extra;
  write_shard(dir / "shard", eps, extra, "png");
  auto manifest = read_shard_manifest(dir / "shard");
  auto ep = read_shard_episode(dir / "shard", 1, manifest);
  EXPECT_EQ(ep.actions, eps[1].actions);
  EXPECT_EQ(ep.rewards, eps[1].rewards);
}

}  // namespace
}  // namespace lps::envs
