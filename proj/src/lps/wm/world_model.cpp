#include "lps/wm/world_model.hpp"

#include <cmath>

#include "lps/core/check.hpp"

namespace lps::wm {
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

void WorldModelOptions::finalize() {
  rssm.embed_dim = embed_dim;
  rssm.action_input_dim = action_dim;
  flow_params.output_dim = action_dim;
  flow_params.input_height = obs_hw;
  flow_params.input_width = obs_hw;
}

void WorldModelOptions::validate() const {
  LPS_CHECK(obs_hw > 0 && obs_channels > 0, "observation shape must be positive");
  LPS_CHECK(action_dim >= 1, "action_dim must be >= 1");
  LPS_CHECK(action_source == "flow" || action_source == "raw",
            "action_source must be 'flow' or 'raw', got '" + action_source + "'");
  LPS_CHECK(!conv_channels.empty(), "conv_channels must be non-empty");
  rssm.validate();
  if (action_source == "flow") flow_params.validate();
}

Config wm_options_to_config(const WorldModelOptions& opts) {
  Config c;
  c.set("obs_hw", opts.obs_hw);
  c.set("obs_channels", opts.obs_channels);
  c.set("conv_channels", join_int_list(opts.conv_channels));
  c.set("embed_dim", opts.embed_dim);
  c.set("action_dim", opts.action_dim);
  c.set("action_source", opts.action_source);
  c.set("deter_dim", opts.rssm.deter_dim);
  c.set("stoch_groups", opts.rssm.stoch_groups);
  c.set("stoch_classes", opts.rssm.stoch_classes);
  c.set("hidden_dim", opts.rssm.hidden_dim);
  c.set("unimix", opts.rssm.unimix);
  c.set("free_nats", opts.rssm.free_nats);
  c.set("dyn_scale", opts.rssm.dyn_scale);
  c.set("rep_scale", opts.rssm.rep_scale);
  c.set("flow_channels", join_int_list(opts.flow_params.channels));
  c.set("flow_projection_width", opts.flow_params.projection_width);
  return c;
}

WorldModelOptions wm_options_from_config(const Config& cfg) {
  WorldModelOptions opts;
  opts.obs_hw = cfg.integer("obs_hw", opts.obs_hw);
  opts.obs_channels = cfg.integer("obs_channels", opts.obs_channels);
  opts.conv_channels = cfg.int_list("conv_channels", opts.conv_channels);
  opts.embed_dim = cfg.integer("embed_dim", opts.embed_dim);
  opts.action_dim = cfg.integer("action_dim", opts.action_dim);
  opts.action_source = cfg.str("action_source", opts.action_source);
  opts.rssm.deter_dim = cfg.integer("deter_dim", opts.rssm.deter_dim);
  opts.rssm.stoch_groups = cfg.integer("stoch_groups", opts.rssm.stoch_groups);
  opts.rssm.stoch_classes = cfg.integer("stoch_classes", opts.rssm.stoch_classes);
  opts.rssm.hidden_dim = cfg.integer("hidden_dim", opts.rssm.hidden_dim);
  opts.rssm.unimix = cfg.real("unimix", opts.rssm.unimix);
  opts.rssm.free_nats = cfg.real("free_nats", opts.rssm.free_nats);
  opts.rssm.dyn_scale = cfg.real("dyn_scale", opts.rssm.dyn_scale);
  opts.rssm.rep_scale = cfg.real("rep_scale", opts.rssm.rep_scale);
  opts.flow_params.channels = cfg.int_list("flow_channels", opts.flow_params.channels);
  opts.flow_params.projection_width =
      cfg.integer("flow_projection_width", opts.flow_params.projection_width);
  opts.finalize();
  return opts;
}

WorldModelImpl::WorldModelImpl(WorldModelOptions opts) : options(std::move(opts)) {
  options.finalize();
  options.validate();
  encoder = register_module(
      "encoder", ConvEncoder(options.obs_channels, options.conv_channels, options.embed_dim,
                             options.obs_hw));
  decoder = register_module(
      "decoder",
      ConvDecoder(options.feature_dim(), options.conv_channels, options.obs_channels,
                  options.obs_hw));
  rssm = register_module("rssm", Rssm(options.rssm));
  raw_embed =
      register_module("raw_embed", torch::nn::Linear(options.action_dim, options.action_dim));
  if (flow_mode()) {
    flow_encoder = register_module("flow_encoder", flow::FlowEncoder(options.flow_params));
  }
}

torch::Tensor WorldModelImpl::encode_obs(torch::Tensor obs) {
  return encoder->forward(obs);
}

torch::Tensor WorldModelImpl::decode_feature(torch::Tensor feature) {
  LPS_CHECK(feature.size(-1) == options.feature_dim(), "feature width mismatch");
  return decoder->forward(feature);
}

torch::Tensor WorldModelImpl::embed_raw_actions(torch::Tensor actions) {
  LPS_CHECK(actions.dim() == 2 && actions.size(1) == options.action_dim,
            "raw actions must be [N, action_dim]");
  return raw_embed->forward(actions);
}

torch::Tensor WorldModelImpl::embed_flow(torch::Tensor flows) {
  LPS_CHECK(flow_mode(), "flow embedding requires the flow-action model");
  return flow_encoder->forward(flows);
}

LatentState WorldModelImpl::encode_state(torch::Tensor obs, SampleMode mode,
                                         std::optional<at::Generator> gen) {
  LPS_CHECK(obs.dim() == 4, "encode_state expects [B, C, H, W]");
  const int64_t batch = obs.size(0);
  torch::Tensor embed = encode_obs(obs);
  const LatentState init = rssm->initial(batch);
  torch::Tensor zero_action = torch::zeros({batch, options.action_dim});
  return rssm->observe(init, zero_action, embed, mode, gen).first;
}

std::vector<LatentState> WorldModelImpl::rollout_raw(const LatentState& s0,
                                                     torch::Tensor actions, SampleMode mode,
                                                     std::optional<at::Generator> gen) {
  LPS_CHECK(!flow_mode(),
            "latent rollouts take raw actions; finetune_swap the pretrained model first");
  LPS_CHECK(actions.dim() == 3 && actions.size(2) == options.action_dim,
            "rollout actions must be [B, h, action_dim]");
  const int64_t b = actions.size(0);
  const int64_t h = actions.size(1);
  torch::Tensor inputs = embed_raw_actions(actions.reshape({b * h, options.action_dim}))
                             .reshape({b, h, options.action_dim});
  return rssm->rollout(s0, inputs, mode, gen);
}

namespace {

struct ForwardResult {
  torch::Tensor total;
  torch::Tensor per_sample;  // [B] recon + raw KL, for NaN diagnostics
  std::map<std::string, double> scalars;
};

ForwardResult wm_forward(WorldModel& wm, const WmBatch& batch,
                         std::optional<at::Generator> gen) {
  const auto& opts = wm->options;
  torch::Tensor obs = batch.obs;
  LPS_CHECK(obs.dim() == 5 && obs.size(2) == opts.obs_channels && obs.size(3) == opts.obs_hw &&
                obs.size(4) == opts.obs_hw,
            "batch obs must be [B, L+1, C, H, W]");
  const int64_t b = obs.size(0);
  const int64_t frames = obs.size(1);
  const int64_t steps = frames - 1;
  LPS_CHECK(steps >= 1, "sequences must contain at least 2 frames");

  torch::Tensor action_inputs;  // [B, L, action_dim]
  if (wm->flow_mode()) {
    torch::Tensor flows = batch.flows;
    LPS_CHECK(flows.defined() && flows.dim() == 5 && flows.size(0) == b &&
                  flows.size(1) == steps && flows.size(2) == 2,
              "flow batch must be [B, L, 2, H, W]");
    action_inputs = wm->embed_flow(flows.reshape({b * steps, 2, flows.size(3), flows.size(4)}))
                        .reshape({b, steps, opts.action_dim});
  } else {
    torch::Tensor actions = batch.actions;
    LPS_CHECK(actions.defined() && actions.dim() == 3 && actions.size(0) == b &&
                  actions.size(1) == steps && actions.size(2) == opts.action_dim,
              "action batch must be [B, L, action_dim]");
    action_inputs = wm->embed_raw_actions(actions.reshape({b * steps, opts.action_dim}))
                        .reshape({b, steps, opts.action_dim});
  }

  torch::Tensor embed =
      wm->encode_obs(obs.reshape({b * frames, opts.obs_channels, opts.obs_hw, opts.obs_hw}))
          .reshape({b, frames, opts.embed_dim});

  LatentState state = wm->rssm->initial(b);
  std::vector<torch::Tensor> features;
  features.reserve(frames);
  torch::Tensor kl_total = torch::zeros({});
  torch::Tensor kl_dyn = torch::zeros({});
  torch::Tensor kl_rep = torch::zeros({});
  torch::Tensor kl_per_sample = torch::zeros({b});
  for (int64_t t = 0; t < frames; ++t) {
    torch::Tensor a = t == 0 ? torch::zeros({b, opts.action_dim})
                             : action_inputs.select(1, t - 1);
    auto [post, prior] = wm->rssm->observe(state, a, embed.select(1, t), SampleMode::kSample, gen);
    const KlLosses kl = wm->rssm->kl_loss(post, prior);
    kl_total = kl_total + kl.total;
    kl_dyn = kl_dyn + kl.dyn;
    kl_rep = kl_rep + kl.rep;
    kl_per_sample = kl_per_sample + kl.raw_per_sample;
    features.push_back(post.feature());
    state = post;
  }
  kl_total = kl_total / static_cast<double>(frames);
  kl_dyn = kl_dyn / static_cast<double>(frames);
  kl_rep = kl_rep / static_cast<double>(frames);
  kl_per_sample = kl_per_sample / static_cast<double>(frames);

  torch::Tensor feats = torch::stack(features, 1);  // [B, L+1, F]
  torch::Tensor recon = wm->decode_feature(feats.reshape({b * frames, opts.feature_dim()}));
  torch::Tensor target =
      obs.reshape({b * frames, opts.obs_channels, opts.obs_hw, opts.obs_hw});
  torch::Tensor se = (recon - target).pow(2).sum({1, 2, 3}).reshape({b, frames});
  torch::Tensor recon_per_sample = se.mean(1);  // [B]
  torch::Tensor recon_loss = recon_per_sample.mean();
  torch::Tensor recon_mae = (recon - target).abs().mean();

  ForwardResult out;
  out.total = recon_loss + kl_total;
  out.per_sample = (recon_per_sample + kl_per_sample).detach();
  out.scalars["loss"] = out.total.item<double>();
  out.scalars["recon"] = recon_loss.item<double>();
  out.scalars["recon_mae"] = recon_mae.item<double>();
  out.scalars["kl"] = kl_total.item<double>();
  out.scalars["kl_dyn"] = kl_dyn.item<double>();
  out.scalars["kl_rep"] = kl_rep.item<double>();
  return out;
}

void check_finite_loss(const ForwardResult& fwd) {
  if (std::isfinite(fwd.scalars.at("loss"))) return;
  const auto per = fwd.per_sample;
  for (int64_t i = 0; i < per.size(0); ++i) {
    if (!std::isfinite(per[i].item<double>())) {
      LPS_FAIL("non-finite loss; offending batch index " + std::to_string(i));
    }
  }
  LPS_FAIL("non-finite loss (no single offending batch element identified)");
}

}  // namespace

std::map<std::string, double> wm_train_step(WorldModel& wm, torch::optim::Optimizer& optimizer,
                                            const WmBatch& batch) {
  wm->train();
  ForwardResult fwd = wm_forward(wm, batch, std::nullopt);
  check_finite_loss(fwd);
  optimizer.zero_grad();
  fwd.total.backward();
  torch::nn::utils::clip_grad_norm_(wm->parameters(), 100.0);
  optimizer.step();
  return fwd.scalars;
}

std::map<std::string, double> wm_eval_loss(WorldModel& wm, const WmBatch& batch) {
  torch::NoGradGuard no_grad;
  wm->eval();
  ForwardResult fwd = wm_forward(wm, batch, std::nullopt);
  wm->train();
  return fwd.scalars;
}

WorldModel finetune_swap(const WorldModel& pretrained, int64_t target_action_dim) {
  LPS_CHECK(pretrained->flow_mode(), "finetune_swap expects a flow-pretrained model");
  LPS_CHECK(target_action_dim == pretrained->options.action_dim,
            "target embodiment action_dim " + std::to_string(target_action_dim) +
                " does not match the pretrained model's " +
                std::to_string(pretrained->options.action_dim));
  WorldModelOptions opts = pretrained->options;
  opts.action_source = "raw";
  WorldModel swapped(opts);
  std::map<std::string, torch::Tensor> tensors = named_tensors(*pretrained);
  std::map<std::string, torch::Tensor> kept;
  for (const auto& [name, t] : tensors) {
    if (name.rfind("flow_encoder.", 0) == 0) continue;  // discarded with the flow path
    kept[name] = t;
  }
  load_named_tensors(*swapped, kept);
  return swapped;
}

void save_world_model(const WorldModel& wm, const std::filesystem::path& path,
                      const std::map<std::string, std::string>& extra_manifest) {
  Checkpoint ckpt;
  ckpt.tensors = named_tensors(*wm);
  ckpt.manifest["kind"] = "world_model";
  const Config oc = wm_options_to_config(wm->options);
  for (const auto& [k, v] : oc.items()) {
    ckpt.manifest["opt." + k] = v;
  }
  for (const auto& [k, v] : extra_manifest) ckpt.manifest[k] = v;
  save_checkpoint(path, ckpt);
}

LoadedWorldModel load_world_model(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  LPS_CHECK(ckpt.manifest.count("kind") && ckpt.manifest.at("kind") == "world_model",
            "not a world-model checkpoint: " + path.string());
  Config oc;
  for (const auto& [k, v] : ckpt.manifest) {
    if (k.rfind("opt.", 0) == 0) oc.set(k.substr(4), v);
  }
  LoadedWorldModel out;
  out.model = WorldModel(wm_options_from_config(oc));
  load_named_tensors(*out.model, ckpt.tensors);
  out.manifest = ckpt.manifest;
  return out;
}

torch::Tensor obs_to_tensor(const Image& img) {
  torch::Tensor t = torch::empty({3, img.height, img.width}, torch::kFloat32);
  auto acc = t.accessor<float, 3>();
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        acc[c][y][x] = static_cast<float>(img.at(y, x, c)) / 255.0f;
      }
    }
  }
  return t;
}

Image tensor_to_image(torch::Tensor chw) {
  LPS_CHECK(chw.dim() == 3 && chw.size(0) == 3, "expected [3, H, W] tensor");
  torch::Tensor c = chw.detach().clamp(0.0, 1.0).contiguous();
  Image img(static_cast<int>(c.size(1)), static_cast<int>(c.size(2)));
  auto acc = c.accessor<float, 3>();
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        img.at(y, x, ch) = static_cast<uint8_t>(std::lround(acc[ch][y][x] * 255.0f));
      }
    }
  }
  return img;
}

}  // namespace lps::wm
