#include "lps/policy/bc_policy.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

#include "lps/core/check.hpp"
#include "lps/core/tensor_io.hpp"

namespace lps::policy {
namespace {

std::string join_int_list(const std::vector<int64_t>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

void PolicyOptions::validate() const {
  LPS_CHECK(head == "diffusion" || head == "regressor",
            "policy head must be 'diffusion' or 'regressor', got '" + head + "'");
  LPS_CHECK(horizon >= 1, "horizon must be >= 1");
  LPS_CHECK(action_dim >= 1, "action_dim must be >= 1");
  LPS_CHECK(obs_embed >= 1 && hidden >= 1, "widths must be positive");
  LPS_CHECK(denoise_steps >= 1, "denoise_steps must be >= 1");
  LPS_CHECK(time_embed >= 2 && time_embed % 2 == 0, "time_embed must be even and >= 2");
  LPS_CHECK(action_bound > 0.0, "action_bound must be positive");
}

Config policy_options_to_config(const PolicyOptions& opts) {
  Config c;
  c.set("obs_hw", opts.obs_hw);
  c.set("obs_channels", opts.obs_channels);
  c.set("conv_channels", join_int_list(opts.conv_channels));
  c.set("obs_embed", opts.obs_embed);
  c.set("horizon", opts.horizon);
  c.set("action_dim", opts.action_dim);
  c.set("head", opts.head);
  c.set("denoise_steps", opts.denoise_steps);
  c.set("hidden", opts.hidden);
  c.set("time_embed", opts.time_embed);
  c.set("action_bound", opts.action_bound);
  return c;
}

PolicyOptions policy_options_from_config(const Config& cfg) {
  PolicyOptions opts;
  opts.obs_hw = cfg.integer("obs_hw", opts.obs_hw);
  opts.obs_channels = cfg.integer("obs_channels", opts.obs_channels);
  opts.conv_channels = cfg.int_list("conv_channels", opts.conv_channels);
  opts.obs_embed = cfg.integer("obs_embed", opts.obs_embed);
  opts.horizon = cfg.integer("horizon", opts.horizon);
  opts.action_dim = cfg.integer("action_dim", opts.action_dim);
  opts.head = cfg.str("head", opts.head);
  opts.denoise_steps = cfg.integer("denoise_steps", opts.denoise_steps);
  opts.hidden = cfg.integer("hidden", opts.hidden);
  opts.time_embed = cfg.integer("time_embed", opts.time_embed);
  opts.action_bound = cfg.real("action_bound", opts.action_bound);
  return opts;
}

DenoiserImpl::DenoiserImpl(int64_t x_dim, int64_t cond_dim, int64_t time_dim, int64_t hidden) {
  fc1 = register_module("fc1", torch::nn::Linear(x_dim + cond_dim + time_dim, hidden));
  fc2 = register_module("fc2", torch::nn::Linear(hidden, hidden));
  out = register_module("out", torch::nn::Linear(hidden, x_dim));
}

torch::Tensor DenoiserImpl::forward(torch::Tensor x, torch::Tensor cond, torch::Tensor temb) {
  torch::Tensor h = torch::cat({x, cond, temb}, 1);
  h = torch::silu(fc1->forward(h));
  h = torch::silu(fc2->forward(h));
  return out->forward(h);
}

BcPolicyImpl::BcPolicyImpl(PolicyOptions opts) : options(std::move(opts)) {
  options.validate();
  obs_encoder = register_module(
      "obs_encoder", wm::ConvEncoder(options.obs_channels, options.conv_channels,
                                     options.obs_embed, options.obs_hw));
  if (options.head == "diffusion") {
    schedule = DdpmSchedule::cosine(options.denoise_steps);
    denoiser = register_module("denoiser", Denoiser(options.chunk_dim(), options.obs_embed,
                                                    options.time_embed, options.hidden));
  } else {
    reg_hidden = register_module("reg_hidden",
                                 torch::nn::Linear(options.obs_embed, options.hidden));
    reg_out = register_module("reg_out", torch::nn::Linear(options.hidden, options.chunk_dim()));
  }
}

torch::Tensor BcPolicyImpl::encode_obs(torch::Tensor obs) { return obs_encoder->forward(obs); }

BcPolicyImpl::Loss BcPolicyImpl::loss(torch::Tensor obs, torch::Tensor chunks,
                                      std::optional<at::Generator> gen) {
  LPS_CHECK(chunks.dim() == 3 && chunks.size(1) == options.horizon &&
                chunks.size(2) == options.action_dim,
            "chunks must be [B, horizon, action_dim]");
  LPS_CHECK(obs.size(0) == chunks.size(0), "obs/chunk batch mismatch");
  const int64_t b = chunks.size(0);
  torch::Tensor x0 = chunks.reshape({b, options.chunk_dim()});
  torch::Tensor cond = encode_obs(obs);

  Loss result;
  if (options.head == "diffusion") {
    torch::Tensor t = gen.has_value()
                          ? torch::randint(1, options.denoise_steps + 1, {b}, *gen,
                                           torch::kInt64)
                          : torch::randint(1, options.denoise_steps + 1, {b}, torch::kInt64);
    torch::Tensor eps = gen.has_value() ? torch::randn({b, options.chunk_dim()}, *gen)
                                        : torch::randn({b, options.chunk_dim()});
    torch::Tensor x_t = schedule.noised(x0, eps, t);
    torch::Tensor temb = timestep_embedding(t, options.time_embed);
    torch::Tensor eps_hat = denoiser->forward(x_t, cond, temb);
    result.per_sample = (eps_hat - eps).pow(2).mean(1);
  } else {
    torch::Tensor pred = reg_out->forward(torch::silu(reg_hidden->forward(cond)));
    result.per_sample = (pred - x0).pow(2).mean(1);
  }
  result.total = result.per_sample.mean();
  return result;
}

torch::Tensor BcPolicyImpl::sample_plans(torch::Tensor obs, int64_t k, uint64_t seed) {
  LPS_CHECK(k >= 1, "need at least one plan");
  torch::NoGradGuard no_grad;
  if (obs.dim() == 3) obs = obs.unsqueeze(0);
  LPS_CHECK(obs.dim() == 4 && obs.size(0) == 1, "sample_plans takes a single observation");
  torch::Tensor cond = encode_obs(obs);  // [1, E]

  torch::Tensor flat;
  if (options.head == "diffusion") {
    at::Generator gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    torch::Tensor cond_k = cond.expand({k, cond.size(1)});
    torch::Tensor x = torch::randn({k, options.chunk_dim()}, gen);
    for (int64_t t = options.denoise_steps; t >= 1; --t) {
      torch::Tensor t_index = torch::full({k}, t, torch::kInt64);
      torch::Tensor temb = timestep_embedding(t_index, options.time_embed);
      torch::Tensor eps_hat = denoiser->forward(x, cond_k, temb);
      torch::Tensor noise =
          t > 1 ? torch::randn({k, options.chunk_dim()}, gen) : torch::zeros_like(x);
      x = schedule.reverse_step(x, eps_hat, t, noise);
    }
    flat = x;
  } else {
    torch::Tensor pred = reg_out->forward(torch::silu(reg_hidden->forward(cond)));
    flat = pred.expand({k, options.chunk_dim()});
  }
  return flat.clamp(-options.action_bound, options.action_bound)
      .reshape({k, options.horizon, options.action_dim})
      .contiguous();
}

std::map<std::string, double> train_bc_step(BcPolicy& policy, torch::optim::Optimizer& optimizer,
                                            torch::Tensor obs, torch::Tensor chunks,
                                            std::optional<at::Generator> gen) {
  policy->train();
  BcPolicyImpl::Loss loss = policy->loss(obs, chunks, gen);
  const double total = loss.total.item<double>();
  if (!std::isfinite(total)) {
    const auto per = loss.per_sample.detach();
    for (int64_t i = 0; i < per.size(0); ++i) {
      if (!std::isfinite(per[i].item<double>())) {
        LPS_FAIL("non-finite policy loss; offending batch index " + std::to_string(i));
      }
    }
    LPS_FAIL("non-finite policy loss");
  }
  optimizer.zero_grad();
  loss.total.backward();
  torch::nn::utils::clip_grad_norm_(policy->parameters(), 100.0);
  optimizer.step();
  return {{"loss", total}};
}

std::vector<std::vector<float>> chunk_actions(const std::vector<std::vector<float>>& actions,
                                              int start, int horizon) {
  LPS_CHECK(!actions.empty(), "cannot chunk an empty action sequence");
  LPS_CHECK(start >= 0 && start < static_cast<int>(actions.size()),
            "chunk start out of range");
  LPS_CHECK(horizon >= 1, "horizon must be >= 1");
  std::vector<std::vector<float>> chunk;
  chunk.reserve(horizon);
  const int last = static_cast<int>(actions.size()) - 1;
  for (int i = 0; i < horizon; ++i) {
    chunk.push_back(actions[std::min(start + i, last)]);
  }
  return chunk;
}

void save_policy(const BcPolicy& policy, const std::filesystem::path& path,
                 const std::map<std::string, std::string>& extra_manifest) {
  Checkpoint ckpt;
  ckpt.tensors = named_tensors(*policy);
  ckpt.manifest["kind"] = "bc_policy";
  const Config oc = policy_options_to_config(policy->options);
  for (const auto& [k, v] : oc.items()) {
    ckpt.manifest["opt." + k] = v;
  }
  for (const auto& [k, v] : extra_manifest) ckpt.manifest[k] = v;
  save_checkpoint(path, ckpt);
}

LoadedPolicy load_policy(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  LPS_CHECK(ckpt.manifest.count("kind") && ckpt.manifest.at("kind") == "bc_policy",
            "not a policy checkpoint: " + path.string());
  Config oc;
  for (const auto& [k, v] : ckpt.manifest) {
    if (k.rfind("opt.", 0) == 0) oc.set(k.substr(4), v);
  }
  LoadedPolicy out;
  out.model = BcPolicy(policy_options_from_config(oc));
  load_named_tensors(*out.model, ckpt.tensors);
  out.manifest = ckpt.manifest;
  return out;
}

}  // namespace lps::policy
