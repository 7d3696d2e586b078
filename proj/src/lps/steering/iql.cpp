#include "lps/steering/iql.hpp"

#include "lps/core/check.hpp"
#include "lps/core/hash.hpp"
#include "lps/core/tensor_io.hpp"

namespace lps::steering {

void IqlOptions::validate() const {
  LPS_CHECK(obs_embed >= 1 && action_dim >= 1 && hidden >= 1, "IqlOptions: bad widths");
  LPS_CHECK(gamma > 0.0 && gamma <= 1.0, "IqlOptions: gamma out of (0,1]: " << gamma);
  LPS_CHECK(tau > 0.0 && tau < 1.0, "IqlOptions: tau out of (0,1): " << tau);
  LPS_CHECK(polyak >= 0.0 && polyak < 1.0, "IqlOptions: polyak out of [0,1): " << polyak);
  if (image_input) {
    LPS_CHECK(!conv_channels.empty() && obs_hw >= 1 && obs_channels >= 1,
              "IqlOptions: bad image torso shape");
  }
}

Config iql_options_to_config(const IqlOptions& opt) {
  Config cfg;
  cfg.set("image_input", opt.image_input);
  cfg.set("obs_hw", opt.obs_hw);
  cfg.set("obs_channels", opt.obs_channels);
  std::string channels;
  for (size_t i = 0; i < opt.conv_channels.size(); ++i) {
    if (i) channels += ", ";
    channels += std::to_string(opt.conv_channels[i]);
  }
  cfg.set("conv_channels", channels);
  cfg.set("obs_embed", opt.obs_embed);
  cfg.set("action_dim", opt.action_dim);
  cfg.set("hidden", opt.hidden);
  cfg.set("gamma", opt.gamma);
  cfg.set("tau", opt.tau);
  cfg.set("polyak", opt.polyak);
  return cfg;
}

IqlOptions iql_options_from_config(const Config& cfg) {
  IqlOptions opt;
  opt.image_input = cfg.boolean("image_input", opt.image_input);
  opt.obs_hw = cfg.integer("obs_hw", opt.obs_hw);
  opt.obs_channels = cfg.integer("obs_channels", opt.obs_channels);
  if (cfg.has("conv_channels")) opt.conv_channels = cfg.int_list("conv_channels");
  opt.obs_embed = cfg.integer("obs_embed", opt.obs_embed);
  opt.action_dim = cfg.integer("action_dim", opt.action_dim);
  opt.hidden = cfg.integer("hidden", opt.hidden);
  opt.gamma = cfg.real("gamma", opt.gamma);
  opt.tau = cfg.real("tau", opt.tau);
  opt.polyak = cfg.real("polyak", opt.polyak);
  return opt;
}

namespace {

torch::nn::Sequential make_head(int64_t in_dim, int64_t hidden) {
  return torch::nn::Sequential(torch::nn::Linear(in_dim, hidden), torch::nn::SiLU(),
                               torch::nn::Linear(hidden, hidden), torch::nn::SiLU(),
                               torch::nn::Linear(hidden, 1));
}

void copy_parameters(const std::vector<torch::Tensor>& src, std::vector<torch::Tensor>& dst) {
  LPS_CHECK(src.size() == dst.size(), "Iql: target/live parameter count mismatch");
  torch::NoGradGuard no_grad;
  for (size_t i = 0; i < src.size(); ++i) dst[i].copy_(src[i]);
}

}  // namespace

IqlImpl::IqlImpl(IqlOptions opts) : options(std::move(opts)) {
  options.validate();
  if (options.image_input) {
    torso_ = register_module(
        "torso", wm::ConvEncoder(options.obs_channels, options.conv_channels,
                                 options.obs_embed, options.obs_hw));
    torso_target_ = register_module(
        "torso_target", wm::ConvEncoder(options.obs_channels, options.conv_channels,
                                        options.obs_embed, options.obs_hw));
  }
  q_head_ = register_module("q_head",
                            make_head(options.obs_embed + options.action_dim, options.hidden));
  v_head_ = register_module("v_head", make_head(options.obs_embed, options.hidden));
  q_target_head_ = register_module(
      "q_target_head", make_head(options.obs_embed + options.action_dim, options.hidden));
  // Target starts as an exact copy of the live Q path.
  auto live_q = q_head_->parameters();
  auto tgt_q = q_target_head_->parameters();
  copy_parameters(live_q, tgt_q);
  if (options.image_input) {
    auto live_t = torso_->parameters();
    auto tgt_t = torso_target_->parameters();
    copy_parameters(live_t, tgt_t);
  }
}

torch::Tensor IqlImpl::embed(torch::Tensor obs, bool target) {
  if (options.image_input) {
    LPS_CHECK(obs.dim() == 4, "Iql: expected [B, C, H, W] observations, got " << obs.sizes());
    return target ? torso_target_->forward(obs) : torso_->forward(obs);
  }
  LPS_CHECK(obs.dim() == 2 && obs.size(1) == options.obs_embed,
            "Iql: expected [B, " << options.obs_embed << "] features, got " << obs.sizes());
  return obs;
}

torch::Tensor IqlImpl::q_value(torch::Tensor obs, torch::Tensor actions) {
  LPS_CHECK(actions.dim() == 2 && actions.size(1) == options.action_dim,
            "Iql::q_value: actions must be [B, " << options.action_dim << "]");
  auto e = embed(obs, /*target=*/false);
  return q_head_->forward(torch::cat({e, actions}, 1)).squeeze(-1);
}

torch::Tensor IqlImpl::state_value(torch::Tensor obs) {
  return v_head_->forward(embed(obs, /*target=*/false)).squeeze(-1);
}

std::vector<torch::Tensor> IqlImpl::live_parameters() {
  std::vector<torch::Tensor> params;
  if (options.image_input) {
    for (auto& p : torso_->parameters()) params.push_back(p);
  }
  for (auto& p : q_head_->parameters()) params.push_back(p);
  for (auto& p : v_head_->parameters()) params.push_back(p);
  return params;
}

void IqlImpl::polyak_update() {
  torch::NoGradGuard no_grad;
  auto blend = [&](const std::vector<torch::Tensor>& live, std::vector<torch::Tensor> tgt) {
    for (size_t i = 0; i < live.size(); ++i) {
      tgt[i].mul_(options.polyak).add_(live[i], 1.0 - options.polyak);
    }
  };
  blend(q_head_->parameters(), q_target_head_->parameters());
  if (options.image_input) blend(torso_->parameters(), torso_target_->parameters());
}

std::map<std::string, double> IqlImpl::train_step(torch::optim::Optimizer& optimizer,
                                                  const IqlBatch& batch) {
  LPS_CHECK(batch.rewards.dim() == 1 && batch.done.dim() == 1, "Iql: rewards/done must be [B]");
  train();

  torch::Tensor q_target_sa;
  torch::Tensor next_v;
  {
    torch::NoGradGuard no_grad;
    auto e_target = embed(batch.obs, /*target=*/true);
    q_target_sa =
        q_target_head_->forward(torch::cat({e_target, batch.actions}, 1)).squeeze(-1);
    next_v = state_value(batch.next_obs);
  }

  // Expectile regression of V toward target-Q: under-estimates are penalized
  // by tau, over-estimates by 1 - tau.
  auto v = state_value(batch.obs);
  auto diff = q_target_sa - v;
  auto weight = torch::where(diff > 0, torch::full_like(diff, options.tau),
                             torch::full_like(diff, 1.0 - options.tau));
  auto v_loss = (weight * diff.pow(2)).mean();

  auto q = q_value(batch.obs, batch.actions);
  auto td_target = batch.rewards + options.gamma * (1.0 - batch.done) * next_v;
  auto q_loss = (q - td_target).pow(2).mean();

  auto loss = v_loss + q_loss;
  LPS_CHECK(torch::isfinite(loss).item<bool>(), "Iql: non-finite loss");
  optimizer.zero_grad();
  loss.backward();
  torch::nn::utils::clip_grad_norm_(live_parameters(), 100.0);
  optimizer.step();
  polyak_update();

  return {{"loss", loss.item<double>()},
          {"v_loss", v_loss.item<double>()},
          {"q_loss", q_loss.item<double>()},
          {"q_mean", q.mean().item<double>()}};
}

void save_iql(const Iql& iql, const std::filesystem::path& path,
              const std::map<std::string, std::string>& extra_manifest) {
  Checkpoint ckpt;
  ckpt.manifest = extra_manifest;
  ckpt.manifest["kind"] = "iql";
  const Config oc = iql_options_to_config(iql->options);
  for (const auto& [key, value] : oc.items()) {
    ckpt.manifest["opt." + key] = value;
  }
  ckpt.tensors = named_tensors(*iql);
  save_checkpoint(path, ckpt);
}

LoadedIql load_iql(const std::filesystem::path& path) {
  auto ckpt = load_checkpoint(path);
  LPS_CHECK(ckpt.manifest.count("kind") && ckpt.manifest.at("kind") == "iql",
            "load_iql: " << path.string() << " is not an IQL checkpoint");
  Config cfg;
  for (const auto& [key, value] : ckpt.manifest) {
    if (key.rfind("opt.", 0) == 0) cfg.set(key.substr(4), value);
  }
  LoadedIql out;
  out.model = Iql(iql_options_from_config(cfg));
  load_named_tensors(*out.model, ckpt.tensors);
  out.manifest = std::move(ckpt.manifest);
  return out;
}

double q_plan_score(Iql& iql, torch::Tensor obs, torch::Tensor plan) {
  LPS_CHECK(plan.dim() == 2 && plan.size(0) >= 1, "q_plan_score: plan must be [h, action_dim]");
  torch::NoGradGuard no_grad;
  if (obs.dim() == 3) obs = obs.unsqueeze(0);
  return iql->q_value(obs, plan.narrow(0, 0, 1)).item<double>();
}

PlanSelection select_plan_by_q(policy::BcPolicy& policy, Iql& iql, torch::Tensor obs,
                               int64_t n_plans, uint64_t seed) {
  LPS_CHECK(n_plans >= 1, "select_plan_by_q: n_plans must be >= 1");
  torch::NoGradGuard no_grad;
  auto plans = policy->sample_plans(obs, n_plans, derive_seed(seed, "plans"));
  auto obs_b = (obs.dim() == 3 ? obs.unsqueeze(0) : obs).expand({n_plans, -1, -1, -1});
  auto q = iql->q_value(obs_b, plans.select(1, 0));
  std::vector<double> scores(n_plans);
  for (int64_t i = 0; i < n_plans; ++i) scores[i] = q[i].item<double>();
  const int64_t best = argmax_lowest(scores);
  return PlanSelection{plans[best].clone(), best, std::move(scores)};
}

}  // namespace lps::steering
