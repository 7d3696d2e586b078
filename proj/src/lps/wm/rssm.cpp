#include "lps/wm/rssm.hpp"

#include "lps/core/check.hpp"

namespace lps::wm {

torch::Tensor categorical_kl(torch::Tensor p, torch::Tensor q) {
  return (p * (p.log() - q.log())).sum(-1);
}

torch::Tensor LatentState::feature() const {
  return torch::cat({deter, stoch.flatten(1)}, -1);
}

LatentState LatentState::detached() const {
  return {deter.detach(), probs.detach(), stoch.detach()};
}

void RssmOptions::validate() const {
  LPS_CHECK(deter_dim >= 1 && stoch_groups >= 1 && stoch_classes >= 2 && hidden_dim >= 1 &&
                action_input_dim >= 1 && embed_dim >= 1,
            "rssm dimensions must be positive (classes >= 2)");
  LPS_CHECK(unimix >= 0.0 && unimix < 1.0, "unimix must be in [0, 1)");
  LPS_CHECK(free_nats >= 0.0 && dyn_scale >= 0.0 && rep_scale >= 0.0,
            "rssm loss weights must be nonnegative");
}

RssmImpl::RssmImpl(RssmOptions opts) : options(opts) {
  options.validate();
  input_proj = register_module(
      "input_proj",
      torch::nn::Linear(options.stoch_flat() + options.action_input_dim, options.hidden_dim));
  cell = register_module("cell", torch::nn::GRUCell(torch::nn::GRUCellOptions(
                                     options.hidden_dim, options.deter_dim)));
  prior_hidden = register_module("prior_hidden",
                                 torch::nn::Linear(options.deter_dim, options.hidden_dim));
  prior_logits = register_module("prior_logits",
                                 torch::nn::Linear(options.hidden_dim, options.stoch_flat()));
  post_hidden = register_module(
      "post_hidden",
      torch::nn::Linear(options.deter_dim + options.embed_dim, options.hidden_dim));
  post_logits = register_module("post_logits",
                                torch::nn::Linear(options.hidden_dim, options.stoch_flat()));
}

LatentState RssmImpl::initial(int64_t batch) const {
  LatentState s;
  s.deter = torch::zeros({batch, options.deter_dim});
  s.probs = torch::full({batch, options.stoch_groups, options.stoch_classes},
                        1.0 / static_cast<double>(options.stoch_classes));
  s.stoch = torch::zeros({batch, options.stoch_groups, options.stoch_classes});
  return s;
}

torch::Tensor RssmImpl::probs_from_logits(torch::Tensor logits) const {
  // Heads emit flat [B, groups*classes]; the simplex is per group.
  logits = logits.reshape({logits.size(0), options.stoch_groups, options.stoch_classes});
  torch::Tensor probs = torch::softmax(logits, -1);
  if (options.unimix > 0.0) {
    probs = (1.0 - options.unimix) * probs +
            options.unimix / static_cast<double>(options.stoch_classes);
  }
  return probs;
}

torch::Tensor RssmImpl::sample_stoch(torch::Tensor probs, SampleMode mode,
                                     std::optional<at::Generator>& gen) const {
  torch::Tensor onehot;
  if (mode == SampleMode::kMode) {
    onehot = torch::one_hot(probs.argmax(-1), options.stoch_classes).to(torch::kFloat32);
  } else {
    const auto flat = probs.detach().reshape({-1, options.stoch_classes});
    torch::Tensor idx = gen.has_value() ? torch::multinomial(flat, 1, false, *gen)
                                        : torch::multinomial(flat, 1, false);
    onehot = torch::one_hot(idx.squeeze(-1), options.stoch_classes)
                 .to(torch::kFloat32)
                 .reshape(probs.sizes());
  }
  if (probs.requires_grad()) {
    // Straight-through: forward is the one-hot sample, gradient flows as if
    // the sample were the probability vector.
    return onehot + probs - probs.detach();
  }
  return onehot;
}

torch::Tensor RssmImpl::deter_step(const LatentState& prev, torch::Tensor action_input) {
  LPS_CHECK(action_input.dim() == 2 && action_input.size(1) == options.action_input_dim,
            "action input must be [B, action_input_dim]");
  LPS_CHECK(action_input.size(0) == prev.batch(), "action/state batch mismatch");
  LPS_CHECK(action_input.isfinite().all().item<bool>(), "non-finite action input");
  torch::Tensor x = torch::cat({prev.stoch.flatten(1), action_input}, -1);
  x = torch::silu(input_proj->forward(x));
  return cell->forward(x, prev.deter);
}

std::pair<LatentState, LatentState> RssmImpl::observe(const LatentState& prev,
                                                      torch::Tensor action_input,
                                                      torch::Tensor embed, SampleMode mode,
                                                      std::optional<at::Generator> gen) {
  LPS_CHECK(embed.dim() == 2 && embed.size(1) == options.embed_dim,
            "embedding must be [B, embed_dim]");
  LPS_CHECK(embed.isfinite().all().item<bool>(), "non-finite observation embedding");
  torch::Tensor deter = deter_step(prev, action_input);

  LatentState prior;
  prior.deter = deter;
  prior.probs = probs_from_logits(
      prior_logits->forward(torch::silu(prior_hidden->forward(deter))));
  prior.stoch = sample_stoch(prior.probs, mode, gen);

  LatentState post;
  post.deter = deter;  // same tensor: posterior and prior share the recurrent path
  post.probs = probs_from_logits(
      post_logits->forward(torch::silu(post_hidden->forward(torch::cat({deter, embed}, -1)))));
  post.stoch = sample_stoch(post.probs, mode, gen);
  return {post, prior};
}

LatentState RssmImpl::imagine(const LatentState& prev, torch::Tensor action_input,
                              SampleMode mode, std::optional<at::Generator> gen) {
  torch::Tensor deter = deter_step(prev, action_input);
  LatentState prior;
  prior.deter = deter;
  prior.probs = probs_from_logits(
      prior_logits->forward(torch::silu(prior_hidden->forward(deter))));
  prior.stoch = sample_stoch(prior.probs, mode, gen);
  return prior;
}

std::vector<LatentState> RssmImpl::rollout(const LatentState& s0, torch::Tensor action_inputs,
                                           SampleMode mode, std::optional<at::Generator> gen) {
  LPS_CHECK(action_inputs.dim() == 3 && action_inputs.size(2) == options.action_input_dim,
            "rollout actions must be [B, h, action_input_dim]");
  LPS_CHECK(action_inputs.size(0) == s0.batch(), "rollout batch mismatch");
  const int64_t h = action_inputs.size(1);
  std::vector<LatentState> states;
  states.reserve(h + 1);
  states.push_back(s0);
  for (int64_t t = 0; t < h; ++t) {
    states.push_back(imagine(states.back(), action_inputs.select(1, t), mode, gen));
  }
  return states;
}

KlLosses RssmImpl::kl_loss(const LatentState& post, const LatentState& prior) const {
  const double free = options.free_nats;
  torch::Tensor dyn_pg = categorical_kl(post.probs.detach(), prior.probs);  // [B, G]
  torch::Tensor rep_pg = categorical_kl(post.probs, prior.probs.detach());
  KlLosses out;
  out.dyn = torch::clamp_min(dyn_pg, free).sum(-1).mean();
  out.rep = torch::clamp_min(rep_pg, free).sum(-1).mean();
  out.total = options.dyn_scale * out.dyn + options.rep_scale * out.rep;
  out.raw_per_sample = categorical_kl(post.probs, prior.probs).sum(-1).detach();
  return out;
}

}  // namespace lps::wm
