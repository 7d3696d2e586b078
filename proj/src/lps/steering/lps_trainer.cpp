#include "lps/steering/lps_trainer.hpp"

#include <vector>

#include "lps/core/check.hpp"
#include "lps/core/hash.hpp"
#include "lps/core/tensor_io.hpp"
#include "lps/steering/returns.hpp"

namespace lps::steering {

namespace {

wm::WorldModel clone_world_model(wm::WorldModel& model) {
  wm::WorldModel copy(model->options);
  load_named_tensors(*copy, named_tensors(*model));
  copy->eval();
  return copy;
}

void check_finite_rows(const torch::Tensor& t, const char* what) {
  if (torch::isfinite(t).all().item<bool>()) return;
  auto bad = (~torch::isfinite(t.reshape({t.size(0), -1})).all(1)).nonzero();
  LPS_FAIL("non-finite " << what << " at batch index " << bad[0].item<int64_t>());
}

std::vector<torch::Tensor> feature_stack(const std::vector<wm::LatentState>& states) {
  std::vector<torch::Tensor> feats;
  feats.reserve(states.size());
  for (const auto& s : states) feats.push_back(s.feature());
  return feats;
}

}  // namespace

LpsTrainer::LpsTrainer(wm::WorldModel wm, policy::BcPolicy policy, ValueFunction vf,
                       SteeringOptions options, uint64_t seed, double value_lr, double wm_lr)
    : options_(options), wm_(std::move(wm)), policy_(std::move(policy)), vf_(std::move(vf)),
      seed_(seed) {
  options_.validate();
  LPS_CHECK(wm_->options.action_source == "raw",
            "LpsTrainer: world model must take raw actions (run the finetune swap first)");
  LPS_CHECK(policy_->options.horizon == options_.horizon,
            "LpsTrainer: policy horizon " << policy_->options.horizon << " != steering horizon "
                                          << options_.horizon);
  LPS_CHECK(vf_->options.feature_dim == wm_->options.rssm.feature_dim(),
            "LpsTrainer: value feature_dim " << vf_->options.feature_dim
                                             << " != world-model feature dim "
                                             << wm_->options.rssm.feature_dim());
  vf_opt_ = std::make_unique<torch::optim::Adam>(vf_->parameters(),
                                                 torch::optim::AdamOptions(value_lr));
  if (options_.finetune_wm) {
    wm_opt_ = std::make_unique<torch::optim::Adam>(wm_->parameters(),
                                                   torch::optim::AdamOptions(wm_lr));
  }
  if (options_.frozen_mode == FrozenMode::kSnapshot) snapshot_ = clone_world_model(wm_);
}

wm::WorldModel& LpsTrainer::scoring_model() {
  if (options_.frozen_mode == FrozenMode::kSnapshot) {
    if (step_ % options_.snapshot_every == 0) {
      load_named_tensors(*snapshot_, named_tensors(*wm_));
    }
    return snapshot_;
  }
  return wm_;
}

std::map<std::string, double> LpsTrainer::train_step(const LpsBatch& batch) {
  LPS_CHECK(batch.obs_seq.dim() == 5 && batch.actions.dim() == 3 && batch.rewards.dim() == 2,
            "LpsTrainer: batch must be obs_seq [B,h+1,C,H,W], actions [B,h,A], rewards [B,h]");
  const int64_t b = batch.obs_seq.size(0);
  const int64_t h = batch.actions.size(1);
  LPS_CHECK(h == options_.horizon, "LpsTrainer: slice length " << h << " != horizon "
                                                               << options_.horizon);
  LPS_CHECK(batch.obs_seq.size(1) == h + 1 && batch.rewards.size(1) == h &&
                batch.actions.size(0) == b && batch.rewards.size(0) == b,
            "LpsTrainer: inconsistent batch shapes");

  std::map<std::string, double> scalars;
  if (options_.finetune_wm) {
    wm::WmBatch wm_batch;
    wm_batch.obs = batch.obs_seq;
    wm_batch.actions = batch.actions;
    auto wm_scalars = wm::wm_train_step(wm_, *wm_opt_, wm_batch);
    for (const auto& [key, value] : wm_scalars) scalars["wm_" + key] = value;
  }

  auto& frozen = scoring_model();
  torch::Tensor features;
  torch::Tensor targets;
  {
    torch::NoGradGuard no_grad;
    auto obs0 = batch.obs_seq.select(1, 0);
    auto start = frozen->encode_state(obs0, wm::SampleMode::kMode);
    auto expert_states = frozen->rollout_raw(start, batch.actions, wm::SampleMode::kMode);
    auto expert_feats = torch::stack(feature_stack(expert_states), /*dim=*/1);  // [B,h+1,D]
    const int64_t dim = expert_feats.size(2);

    auto values_of = [&](const torch::Tensor& feats) {
      return vf_->value(feats.narrow(1, 1, h).reshape({b * h, dim})).reshape({b, h});
    };
    auto expert_targets =
        lambda_returns_t(batch.rewards, values_of(expert_feats), options_.gamma, options_.lambda);
    check_finite_rows(expert_targets, "expert return target");
    scalars["target_mean"] = expert_targets.mean().item<double>();

    auto train_feats = expert_feats.narrow(1, 0, h).reshape({b * h, dim});
    auto train_targets = expert_targets.reshape({b * h});

    if (options_.variant != RewardVariant::kBinary) {
      const uint64_t plan_seed = derive_seed(seed_, "plan", static_cast<uint64_t>(step_));
      std::vector<torch::Tensor> plan_rows;
      plan_rows.reserve(b);
      for (int64_t i = 0; i < b; ++i) {
        plan_rows.push_back(
            policy_->sample_plans(obs0[i], 1, derive_seed(plan_seed, static_cast<uint64_t>(i)))
                .squeeze(0));
      }
      auto plans = torch::stack(plan_rows, 0);  // [B,h,A]
      auto policy_states = frozen->rollout_raw(start, plans, wm::SampleMode::kMode);
      auto policy_feats = torch::stack(feature_stack(policy_states), /*dim=*/1);

      torch::Tensor shaped;
      if (options_.variant == RewardVariant::kFull) {
        shaped = shaped_rewards_t(batch.rewards, expert_feats.narrow(1, 0, h),
                                  policy_feats.narrow(1, 0, h));
        scalars["cos_mean"] =
            (1.0 + 2.0 * (shaped - batch.rewards).mean().item<double>());
      } else {  // bootstrap: raw rewards on the policy branch
        shaped = batch.rewards;
      }
      scalars["shaped_mean"] = shaped.mean().item<double>();
      auto policy_targets =
          lambda_returns_t(shaped, values_of(policy_feats), options_.gamma, options_.lambda);
      check_finite_rows(policy_targets, "policy return target");
      train_feats =
          torch::cat({train_feats, policy_feats.narrow(1, 0, h).reshape({b * h, dim})}, 0);
      train_targets = torch::cat({train_targets, policy_targets.reshape({b * h})}, 0);
    }
    features = train_feats;
    targets = train_targets;
  }

  vf_->train();
  auto loss = vf_->loss(features, targets);
  LPS_CHECK(torch::isfinite(loss).item<bool>(), "LpsTrainer: non-finite value loss at step "
                                                    << step_);
  vf_opt_->zero_grad();
  loss.backward();
  torch::nn::utils::clip_grad_norm_(vf_->parameters(), 100.0);
  vf_opt_->step();

  scalars["value_loss"] = loss.item<double>();
  scalars["target_max"] = targets.max().item<double>();
  ++step_;
  return scalars;
}

}  // namespace lps::steering
