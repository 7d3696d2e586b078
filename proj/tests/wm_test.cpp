#include <gtest/gtest.h>
#include <torch/torch.h>

#include <filesystem>

#include "lps/core/check.hpp"
#include "lps/core/tensor_io.hpp"
#include "lps/wm/conv_nets.hpp"
#include "lps/wm/rssm.hpp"
#include "lps/wm/world_model.hpp"

namespace lps::wm {
namespace {

std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("lps_wm_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Undefined gradients (zero_grad resets to none) count as zero.
double grad_abs_sum(const torch::Tensor& param) {
  const torch::Tensor g = param.grad();
  return g.defined() ? g.abs().sum().item<double>() : 0.0;
}

RssmOptions tiny_rssm_options() {
  RssmOptions o;
  o.deter_dim = 16;
  o.stoch_groups = 3;
  o.stoch_classes = 5;
  o.hidden_dim = 16;
  o.action_input_dim = 2;
  o.embed_dim = 8;
  return o;
}

WorldModelOptions tiny_wm_options(const std::string& source) {
  WorldModelOptions o;
  o.obs_hw = 16;
  o.conv_channels = {4, 8};
  o.embed_dim = 8;
  o.action_dim = 2;
  o.action_source = source;
  o.rssm = tiny_rssm_options();
  o.flow_params.channels = {4, 8};
  o.flow_params.projection_width = 8;
  o.finalize();
  return o;
}

TEST(Rssm, LatentShapesAndPerGroupSimplex) {
  torch::manual_seed(0);
  Rssm rssm(tiny_rssm_options());
  const LatentState init = rssm->initial(4);
  EXPECT_EQ(init.deter.sizes(), (std::vector<int64_t>{4, 16}));
  EXPECT_EQ(init.probs.sizes(), (std::vector<int64_t>{4, 3, 5}));
  EXPECT_EQ(init.stoch.sizes(), (std::vector<int64_t>{4, 3, 5}));
  EXPECT_EQ(init.feature().sizes(), (std::vector<int64_t>{4, 16 + 15}));

  torch::NoGradGuard ng;  // keeps the sample an exact one-hot (no straight-through residue)
  const auto [post, prior] =
      rssm->observe(init, torch::randn({4, 2}), torch::randn({4, 8}), SampleMode::kMode);
  for (const LatentState* s : {&post, &prior}) {
    EXPECT_EQ(s->probs.sizes(), (std::vector<int64_t>{4, 3, 5}));
    EXPECT_EQ(s->stoch.sizes(), (std::vector<int64_t>{4, 3, 5}));
    // Each group is a simplex with the unimix floor applied.
    const torch::Tensor sums = s->probs.sum(-1);
    EXPECT_TRUE(sums.allclose(torch::ones_like(sums), 1e-5, 1e-5));
    EXPECT_GE(s->probs.min().item<double>(), 0.01 / 5 - 1e-8);
    // The sample is exactly one-hot per group.
    const torch::Tensor row_sum = s->stoch.sum(-1);
    EXPECT_TRUE(row_sum.allclose(torch::ones_like(row_sum)));
    EXPECT_TRUE(std::get<0>(s->stoch.max(-1)).eq(1.0).all().item<bool>());
  }
  // Posterior and prior share the recurrent tensor bitwise.
  EXPECT_EQ(post.deter.data_ptr(), prior.deter.data_ptr());
}

TEST(Rssm, ModeIsArgmaxAndSamplingIsSeeded) {
  torch::manual_seed(1);
  Rssm rssm(tiny_rssm_options());
  const LatentState init = rssm->initial(3);
  const torch::Tensor act = torch::randn({3, 2});
  const torch::Tensor emb = torch::randn({3, 8});

  torch::NoGradGuard ng;
  const LatentState mode_a = rssm->observe(init, act, emb, SampleMode::kMode).first;
  const LatentState mode_b = rssm->observe(init, act, emb, SampleMode::kMode).first;
  EXPECT_TRUE(mode_a.stoch.equal(mode_b.stoch));
  EXPECT_TRUE(mode_a.stoch.argmax(-1).equal(mode_a.probs.argmax(-1)));

  auto gen1 = at::make_generator<at::CPUGeneratorImpl>(99);
  auto gen2 = at::make_generator<at::CPUGeneratorImpl>(99);
  auto gen3 = at::make_generator<at::CPUGeneratorImpl>(100);
  const LatentState s1 = rssm->observe(init, act, emb, SampleMode::kSample, gen1).first;
  const LatentState s2 = rssm->observe(init, act, emb, SampleMode::kSample, gen2).first;
  const LatentState s3 = rssm->observe(init, act, emb, SampleMode::kSample, gen3).first;
  EXPECT_TRUE(s1.stoch.equal(s2.stoch));
  // 3x3 groups of 5 near-uniform classes: a colliding draw is vanishingly rare.
  EXPECT_FALSE(s1.stoch.equal(s3.stoch));
}

TEST(Rssm, RolloutIncludesStartState) {
  torch::manual_seed(2);
  Rssm rssm(tiny_rssm_options());
  const LatentState s0 = rssm->initial(2);

  const auto none = rssm->rollout(s0, torch::zeros({2, 0, 2}), SampleMode::kMode);
  ASSERT_EQ(none.size(), 1u);
  EXPECT_TRUE(none[0].deter.equal(s0.deter));

  const auto five = rssm->rollout(s0, torch::randn({2, 5, 2}), SampleMode::kMode);
  ASSERT_EQ(five.size(), 6u);
  EXPECT_TRUE(five[0].deter.equal(s0.deter));
  for (const auto& s : five) {
    EXPECT_EQ(s.feature().sizes(), (std::vector<int64_t>{2, 31}));
  }

  EXPECT_THROW(rssm->rollout(s0, torch::randn({2, 5, 3}), SampleMode::kMode), Error);
  EXPECT_THROW(rssm->rollout(s0, torch::randn({3, 5, 2}), SampleMode::kMode), Error);
}

TEST(Rssm, KlFreeBitsFloorIsExactOnEqualDistributions) {
  auto opts = tiny_rssm_options();  // free_nats = 1.0, scales 0.5 / 0.1
  Rssm rssm(opts);
  LatentState post = rssm->initial(4);
  LatentState prior = rssm->initial(4);  // identical probs -> KL is 0 per group
  const KlLosses kl = rssm->kl_loss(post, prior);
  EXPECT_NEAR(kl.dyn.item<double>(), 3.0, 1e-6);  // 3 groups x 1 free nat
  EXPECT_NEAR(kl.rep.item<double>(), 3.0, 1e-6);
  EXPECT_NEAR(kl.total.item<double>(), 0.5 * 3.0 + 0.1 * 3.0, 1e-6);
  EXPECT_NEAR(kl.raw_per_sample.abs().max().item<double>(), 0.0, 1e-6);
}

TEST(Rssm, KlBalancingStopsTheRightGradients) {
  torch::manual_seed(3);
  auto opts = tiny_rssm_options();
  opts.free_nats = 0.0;  // the floor would otherwise zero all gradients
  Rssm rssm(opts);
  const auto [post, prior] =
      rssm->observe(rssm->initial(2), torch::randn({2, 2}), torch::randn({2, 8}),
                    SampleMode::kSample);
  const KlLosses kl = rssm->kl_loss(post, prior);

  rssm->zero_grad();
  kl.dyn.backward({}, /*keep_graph=*/true);
  EXPECT_GT(grad_abs_sum(rssm->prior_logits->weight), 0.0);
  EXPECT_EQ(grad_abs_sum(rssm->post_logits->weight), 0.0);

  rssm->zero_grad();
  kl.rep.backward();
  EXPECT_GT(grad_abs_sum(rssm->post_logits->weight), 0.0);
  EXPECT_EQ(grad_abs_sum(rssm->prior_logits->weight), 0.0);
}

TEST(ConvNets, EncoderDecoderShapes) {
  torch::manual_seed(4);
  ConvEncoder enc(3, std::vector<int64_t>{4, 8}, 12, 16);
  const torch::Tensor e = enc->forward(torch::rand({5, 3, 16, 16}));
  EXPECT_EQ(e.sizes(), (std::vector<int64_t>{5, 12}));
  EXPECT_TRUE(e.isfinite().all().item<bool>());

  ConvDecoder dec(12, std::vector<int64_t>{4, 8}, 3, 16);
  const torch::Tensor d = dec->forward(e);
  EXPECT_EQ(d.sizes(), (std::vector<int64_t>{5, 3, 16, 16}));
  EXPECT_TRUE(d.isfinite().all().item<bool>());
}

WmBatch fixed_raw_batch(int64_t b, int64_t steps) {
  WmBatch batch;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(7);
  batch.obs = torch::rand({b, steps + 1, 3, 16, 16}, gen);
  batch.actions = torch::rand({b, steps, 2}, gen) * 2.0 - 1.0;
  return batch;
}

TEST(WorldModel, TrainStepFitsAFixedBatch) {
  torch::manual_seed(5);
  WorldModel wm(tiny_wm_options("raw"));
  torch::optim::Adam opt(wm->parameters(), torch::optim::AdamOptions(3e-3));
  const WmBatch batch = fixed_raw_batch(2, 3);

  auto first = wm_train_step(wm, opt, batch);
  for (const char* key : {"loss", "recon", "recon_mae", "kl", "kl_dyn", "kl_rep"}) {
    ASSERT_TRUE(first.count(key)) << key;
    EXPECT_TRUE(std::isfinite(first.at(key))) << key;
  }
  std::map<std::string, double> last;
  for (int i = 0; i < 40; ++i) last = wm_train_step(wm, opt, batch);
  EXPECT_LT(last.at("recon"), 0.5 * first.at("recon"))
      << "first recon " << first.at("recon") << " last " << last.at("recon");

  // Eval samples the posterior from the global RNG; under the same seed it
  // must be bit-reproducible (no parameter or buffer mutation).
  torch::manual_seed(123);
  const auto eval1 = wm_eval_loss(wm, batch);
  torch::manual_seed(123);
  const auto eval2 = wm_eval_loss(wm, batch);
  EXPECT_DOUBLE_EQ(eval1.at("recon"), eval2.at("recon"));
}

TEST(WorldModel, FlowModeRoutesFlowAndRejectsMissingInputs) {
  torch::manual_seed(6);
  WorldModel wm(tiny_wm_options("flow"));
  torch::optim::Adam opt(wm->parameters(), torch::optim::AdamOptions(1e-3));

  WmBatch batch;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(8);
  batch.obs = torch::rand({2, 4, 3, 16, 16}, gen);
  batch.flows = torch::randn({2, 3, 2, 16, 16}, gen) * 0.05;
  const auto scalars = wm_train_step(wm, opt, batch);
  EXPECT_TRUE(std::isfinite(scalars.at("loss")));

  // Raw-action batches do not drive the flow-action model, and vice versa.
  WmBatch raw_only = fixed_raw_batch(2, 3);
  EXPECT_THROW(wm_train_step(wm, opt, raw_only), Error);
  EXPECT_THROW(wm->rollout_raw(wm->rssm->initial(2), torch::zeros({2, 3, 2}),
                               SampleMode::kMode),
               Error);

  WorldModel raw_wm(tiny_wm_options("raw"));
  EXPECT_THROW(raw_wm->embed_flow(torch::zeros({2, 2, 16, 16})), Error);
  torch::optim::Adam raw_opt(raw_wm->parameters(), torch::optim::AdamOptions(1e-3));
  EXPECT_THROW(wm_train_step(raw_wm, raw_opt, batch), Error);  // batch lacks actions
}

TEST(WorldModel, FinetuneSwapCarriesEverythingButTheFlowPath) {
  torch::manual_seed(7);
  WorldModel pre(tiny_wm_options("flow"));
  // Nudge weights away from init so a copy bug cannot hide behind luck.
  torch::optim::Adam opt(pre->parameters(), torch::optim::AdamOptions(1e-2));
  WmBatch batch;
  batch.obs = torch::rand({1, 3, 3, 16, 16});
  batch.flows = torch::randn({1, 2, 2, 16, 16}) * 0.05;
  wm_train_step(pre, opt, batch);

  WorldModel fine = finetune_swap(pre, 2);
  EXPECT_FALSE(fine->flow_mode());
  EXPECT_EQ(fine->options.feature_dim(), pre->options.feature_dim());

  const auto pre_tensors = named_tensors(*pre);
  const auto fine_tensors = named_tensors(*fine);
  int carried = 0;
  for (const auto& [name, t] : fine_tensors) {
    EXPECT_EQ(name.rfind("flow_encoder.", 0), std::string::npos) << name;
    ASSERT_TRUE(pre_tensors.count(name)) << name;
    EXPECT_TRUE(t.equal(pre_tensors.at(name))) << name;
    ++carried;
  }
  EXPECT_GT(carried, 10);
  // The flow path existed on the pretrained model and was dropped.
  bool pre_has_flow = false;
  for (const auto& [name, t] : pre_tensors) {
    pre_has_flow = pre_has_flow || name.rfind("flow_encoder.", 0) == 0;
  }
  EXPECT_TRUE(pre_has_flow);

  EXPECT_THROW(finetune_swap(pre, 4), Error);  // action_dim mismatch
  EXPECT_THROW(finetune_swap(fine, 2), Error);  // already raw
}

TEST(WorldModel, SaveLoadRoundTrip) {
  torch::manual_seed(8);
  const auto dir = temp_dir("ckpt");
  WorldModel wm(tiny_wm_options("flow"));
  save_world_model(wm, dir / "wm.ckpt", {{"stage", "abc123"}});

  LoadedWorldModel loaded = load_world_model(dir / "wm.ckpt");
  EXPECT_EQ(parameter_hash(*loaded.model), parameter_hash(*wm));
  EXPECT_EQ(loaded.model->options.action_source, "flow");
  EXPECT_EQ(loaded.model->options.feature_dim(), wm->options.feature_dim());
  EXPECT_EQ(loaded.manifest.at("stage"), "abc123");

  // Config round trip preserves every architectural field.
  const WorldModelOptions rt = wm_options_from_config(wm_options_to_config(wm->options));
  EXPECT_EQ(rt.conv_channels, wm->options.conv_channels);
  EXPECT_EQ(rt.rssm.stoch_groups, wm->options.rssm.stoch_groups);
  EXPECT_EQ(rt.flow_params.channels, wm->options.flow_params.channels);
  EXPECT_DOUBLE_EQ(rt.rssm.unimix, wm->options.rssm.unimix);
}

TEST(WorldModel, EncodeStateIsDeterministicInModeSampling) {
  torch::manual_seed(9);
  WorldModel wm(tiny_wm_options("raw"));
  const torch::Tensor obs = torch::rand({2, 3, 16, 16});
  torch::NoGradGuard ng;
  const LatentState a = wm->encode_state(obs, SampleMode::kMode);
  const LatentState b = wm->encode_state(obs, SampleMode::kMode);
  EXPECT_TRUE(a.feature().equal(b.feature()));

  const auto states = wm->rollout_raw(a, torch::rand({2, 4, 2}) * 2.0 - 1.0, SampleMode::kMode);
  ASSERT_EQ(states.size(), 5u);
  EXPECT_TRUE(states[0].feature().equal(a.feature()));
}

TEST(WorldModel, ObsTensorRoundTrip) {
  Image img(8, 8);
  for (size_t i = 0; i < img.data.size(); ++i) {
    img.data[i] = static_cast<uint8_t>((i * 37) % 256);
  }
  const torch::Tensor t = obs_to_tensor(img);
  EXPECT_EQ(t.sizes(), (std::vector<int64_t>{3, 8, 8}));
  EXPECT_GE(t.min().item<float>(), 0.0f);
  EXPECT_LE(t.max().item<float>(), 1.0f);
  EXPECT_FLOAT_EQ(t[1][0][1].item<float>(), img.at(0, 1, 1) / 255.0f);

  const Image back = tensor_to_image(t);
  EXPECT_EQ(back.data, img.data);

  // Out-of-range features clamp instead of wrapping.
  const Image extreme = tensor_to_image(torch::full({3, 8, 8}, 2.5f));
  EXPECT_EQ(extreme.at(0, 0, 0), 255);
}

}  // namespace
}  // namespace lps::wm
