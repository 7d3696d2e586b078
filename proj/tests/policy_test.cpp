#include <gtest/gtest.h>
#include <torch/torch.h>

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <filesystem>

#include "lps/core/check.hpp"
#include "lps/core/tensor_io.hpp"
#include "lps/policy/bc_policy.hpp"
#include "lps/policy/ddpm.hpp"

namespace lps::policy {
namespace {

std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("lps_policy_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

PolicyOptions tiny_options(const std::string& head) {
  PolicyOptions o;
  o.obs_hw = 16;
  o.conv_channels = {4, 8};
  o.obs_embed = 16;
  o.horizon = 3;
  o.action_dim = 2;
  o.head = head;
  o.denoise_steps = 5;
  o.hidden = 32;
  o.time_embed = 8;
  return o;
}

TEST(DdpmSchedule, CosineProfileInvariants) {
  const auto s = DdpmSchedule::cosine(50);
  ASSERT_EQ(s.alpha_bar.size(), 51u);
  ASSERT_EQ(s.beta.size(), 50u);
  EXPECT_DOUBLE_EQ(s.alpha_bar[0], 1.0);
  for (int64_t t = 1; t <= 50; ++t) {
    EXPECT_LT(s.alpha_bar[t], s.alpha_bar[t - 1]) << t;  // signal strictly decays
    EXPECT_GT(s.alpha_bar[t], 0.0) << t;
    EXPECT_GE(s.beta[t - 1], 1e-8) << t;
    EXPECT_LE(s.beta[t - 1], 0.999) << t;
    // beta is the per-step variance implied by the alpha_bar ratio.
    const double implied = 1.0 - s.alpha_bar[t] / s.alpha_bar[t - 1];
    if (implied > 1e-8 && implied < 0.999) {
      EXPECT_NEAR(s.beta[t - 1], implied, 1e-12) << t;
    }
  }
  EXPECT_THROW(DdpmSchedule::cosine(0), Error);
}

TEST(DdpmSchedule, NoisedMatchesClosedForm) {
  const auto s = DdpmSchedule::cosine(10);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(1);
  const torch::Tensor x0 = torch::randn({3, 4}, gen);
  const torch::Tensor eps = torch::randn({3, 4}, gen);
  const torch::Tensor t = torch::tensor({1, 5, 10}, torch::kInt64);
  const torch::Tensor got = s.noised(x0, eps, t);
  for (int64_t i = 0; i < 3; ++i) {
    const double ab = s.alpha_bar[t[i].item<int64_t>()];
    const torch::Tensor want =
        std::sqrt(ab) * x0[i] + std::sqrt(1.0 - ab) * eps[i];
    EXPECT_TRUE(got[i].allclose(want, 1e-5, 1e-6)) << i;
  }
  EXPECT_THROW(s.noised(x0, eps, torch::tensor({0, 5, 10}, torch::kInt64)), Error);
  EXPECT_THROW(s.noised(x0, eps, torch::tensor({1, 5, 11}, torch::kInt64)), Error);
}

TEST(DdpmSchedule, FinalReverseStepWithExactNoiseRecoversTheSample) {
  // At t=1, beta_1 = 1 - alpha_bar_1 and the reverse mean collapses to x0
  // exactly when the predicted noise equals the true noise.
  const auto s = DdpmSchedule::cosine(8);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(2);
  const torch::Tensor x0 = torch::randn({4, 6}, gen);
  const torch::Tensor eps = torch::randn({4, 6}, gen);
  const torch::Tensor x1 = s.noised(x0, eps, torch::ones({4}, torch::kInt64));
  const torch::Tensor rec = s.reverse_step(x1, eps, 1, torch::randn({4, 6}, gen) * 100.0);
  EXPECT_TRUE(rec.allclose(x0, 1e-4, 1e-5));
  EXPECT_THROW(s.reverse_step(x1, eps, 0, torch::zeros({4, 6})), Error);
  EXPECT_THROW(s.reverse_step(x1, eps, 9, torch::zeros({4, 6})), Error);
}

TEST(Ddpm, TimestepEmbeddingIsSinusoidal) {
  const torch::Tensor t = torch::tensor({0, 1, 7}, torch::kInt64);
  const torch::Tensor emb = timestep_embedding(t, 8);
  EXPECT_EQ(emb.sizes(), (std::vector<int64_t>{3, 8}));
  // t = 0: all sines are 0, all cosines are 1.
  EXPECT_TRUE(emb[0].slice(0, 0, 4).allclose(torch::zeros({4})));
  EXPECT_TRUE(emb[0].slice(0, 4, 8).allclose(torch::ones({4})));
  EXPECT_LE(emb.abs().max().item<double>(), 1.0 + 1e-6);
  EXPECT_FALSE(emb[1].allclose(emb[2]));
  EXPECT_THROW(timestep_embedding(t, 7), Error);
}

TEST(Policy, RegressorOverfitsOneDemonstration) {
  torch::manual_seed(10);
  BcPolicy policy(tiny_options("regressor"));
  auto gen = at::make_generator<at::CPUGeneratorImpl>(3);
  const torch::Tensor obs = torch::rand({1, 3, 16, 16}, gen);
  const torch::Tensor chunk = torch::rand({1, 3, 2}, gen) - 0.5;

  torch::optim::Adam opt(policy->parameters(), torch::optim::AdamOptions(1e-2));
  double loss = 0.0;
  for (int i = 0; i < 200; ++i) loss = train_bc_step(policy, opt, obs, chunk).at("loss");
  EXPECT_LT(loss, 1e-4);

  const torch::Tensor plans = policy->sample_plans(obs, 4, 0);
  EXPECT_EQ(plans.sizes(), (std::vector<int64_t>{4, 3, 2}));
  for (int64_t k = 0; k < 4; ++k) {
    EXPECT_TRUE(plans[k].equal(plans[0]));  // regressor plans are deterministic copies
    EXPECT_TRUE(plans[k].allclose(chunk[0], 0.0, 0.05));
  }
}

TEST(Policy, DiffusionLossLearnsAndIsSeedReproducible) {
  torch::manual_seed(11);
  BcPolicy policy(tiny_options("diffusion"));
  auto data_gen = at::make_generator<at::CPUGeneratorImpl>(4);
  const torch::Tensor obs = torch::rand({8, 3, 16, 16}, data_gen).slice(0, 0, 1).expand({8, 3, 16, 16}).contiguous();
  const torch::Tensor chunks =
      (torch::rand({1, 3, 2}, data_gen) - 0.5).expand({8, 3, 2}).contiguous();

  // Same generator seed, same draw of (t, eps): the loss must be bitwise equal.
  {
    torch::NoGradGuard ng;
    auto g1 = at::make_generator<at::CPUGeneratorImpl>(5);
    auto g2 = at::make_generator<at::CPUGeneratorImpl>(5);
    const auto l1 = policy->loss(obs, chunks, g1);
    const auto l2 = policy->loss(obs, chunks, g2);
    EXPECT_TRUE(l1.per_sample.equal(l2.per_sample));
    EXPECT_EQ(l1.per_sample.sizes(), (std::vector<int64_t>{8}));
  }

  double before;
  {
    torch::NoGradGuard ng;
    auto g = at::make_generator<at::CPUGeneratorImpl>(6);
    before = policy->loss(obs, chunks, g).total.item<double>();
  }
  torch::optim::Adam opt(policy->parameters(), torch::optim::AdamOptions(3e-3));
  for (int i = 0; i < 150; ++i) {
    auto g = at::make_generator<at::CPUGeneratorImpl>(1000 + i);
    train_bc_step(policy, opt, obs, chunks, g);
  }
  double after;
  {
    torch::NoGradGuard ng;
    auto g = at::make_generator<at::CPUGeneratorImpl>(6);  // identical noise draw as `before`
    after = policy->loss(obs, chunks, g).total.item<double>();
  }
  EXPECT_LT(after, 0.5 * before) << "before " << before << " after " << after;
}

TEST(Policy, SamplePlansIsSeededAndBounded) {
  torch::manual_seed(12);
  auto opts = tiny_options("diffusion");
  opts.action_bound = 0.7;
  BcPolicy policy(opts);
  const torch::Tensor obs = torch::rand({1, 3, 16, 16});

  const torch::Tensor a = policy->sample_plans(obs, 5, 42);
  const torch::Tensor b = policy->sample_plans(obs, 5, 42);
  const torch::Tensor c = policy->sample_plans(obs, 5, 43);
  EXPECT_EQ(a.sizes(), (std::vector<int64_t>{5, 3, 2}));
  EXPECT_TRUE(a.equal(b));
  EXPECT_FALSE(a.equal(c));
  EXPECT_FALSE(a[0].equal(a[1]));  // untrained net: independent noise -> distinct plans
  EXPECT_LE(a.abs().max().item<double>(), 0.7);

  // A rank-3 observation is treated as an unbatched single frame.
  const torch::Tensor d = policy->sample_plans(obs.squeeze(0), 5, 42);
  EXPECT_TRUE(d.equal(a));
  EXPECT_THROW(policy->sample_plans(torch::rand({2, 3, 16, 16}), 5, 42), Error);
  EXPECT_THROW(policy->sample_plans(obs, 0, 42), Error);
}

TEST(Policy, ChunkActionsRepeatsFinalActionPastTheTail) {
  const std::vector<std::vector<float>> actions = {{1, 2}, {3, 4}, {5, 6}};
  const auto padded = chunk_actions(actions, 1, 4);
  ASSERT_EQ(padded.size(), 4u);
  EXPECT_EQ(padded[0], (std::vector<float>{3, 4}));
  EXPECT_EQ(padded[1], (std::vector<float>{5, 6}));
  EXPECT_EQ(padded[2], (std::vector<float>{5, 6}));
  EXPECT_EQ(padded[3], (std::vector<float>{5, 6}));

  const auto exact = chunk_actions(actions, 0, 2);
  ASSERT_EQ(exact.size(), 2u);
  EXPECT_EQ(exact[1], (std::vector<float>{3, 4}));

  EXPECT_THROW(chunk_actions({}, 0, 2), Error);
  EXPECT_THROW(chunk_actions(actions, 3, 2), Error);
  EXPECT_THROW(chunk_actions(actions, -1, 2), Error);
  EXPECT_THROW(chunk_actions(actions, 0, 0), Error);
}

TEST(Policy, SaveLoadRoundTrip) {
  torch::manual_seed(13);
  const auto dir = temp_dir("ckpt");
  auto opts = tiny_options("diffusion");
  opts.action_bound = 0.9;
  BcPolicy policy(opts);
  save_policy(policy, dir / "policy.ckpt", {{"demos", "30"}});

  LoadedPolicy loaded = load_policy(dir / "policy.ckpt");
  EXPECT_EQ(parameter_hash(*loaded.model), parameter_hash(*policy));
  EXPECT_EQ(loaded.model->options.head, "diffusion");
  EXPECT_EQ(loaded.model->options.horizon, 3);
  EXPECT_EQ(loaded.model->options.denoise_steps, 5);
  EXPECT_DOUBLE_EQ(loaded.model->options.action_bound, 0.9);
  EXPECT_EQ(loaded.manifest.at("demos"), "30");

  const torch::Tensor obs = torch::rand({1, 3, 16, 16});
  EXPECT_TRUE(loaded.model->sample_plans(obs, 3, 7).equal(policy->sample_plans(obs, 3, 7)));

  // Regressor variant round-trips through the same container.
  BcPolicy reg(tiny_options("regressor"));
  save_policy(reg, dir / "reg.ckpt");
  EXPECT_EQ(parameter_hash(*load_policy(dir / "reg.ckpt").model), parameter_hash(*reg));

  EXPECT_THROW(load_policy(dir / "missing.ckpt"), Error);
}

TEST(Policy, LossValidatesShapes) {
  BcPolicy policy(tiny_options("diffusion"));
  const torch::Tensor obs = torch::rand({2, 3, 16, 16});
  EXPECT_THROW(policy->loss(obs, torch::rand({2, 4, 2})), Error);   // wrong horizon
  EXPECT_THROW(policy->loss(obs, torch::rand({2, 3, 1})), Error);   // wrong action dim
  EXPECT_THROW(policy->loss(obs, torch::rand({3, 3, 2})), Error);   // batch mismatch
  auto bad = tiny_options("neither");
  EXPECT_THROW(BcPolicy{bad}, Error);
  auto odd_time = tiny_options("diffusion");
  odd_time.time_embed = 7;
  EXPECT_THROW(BcPolicy{odd_time}, Error);
}

}  // namespace
}  // namespace lps::policy
