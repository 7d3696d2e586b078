#include "lps/steering/value_function.hpp"

#include "lps/core/check.hpp"
#include "lps/core/symlog.hpp"
#include "lps/core/tensor_io.hpp"

namespace lps::steering {

void ValueOptions::validate() const {
  LPS_CHECK(feature_dim >= 1, "ValueOptions: feature_dim must be positive");
  LPS_CHECK(hidden >= 1, "ValueOptions: hidden must be positive");
}

Config value_options_to_config(const ValueOptions& opt) {
  Config cfg;
  cfg.set("feature_dim", opt.feature_dim);
  cfg.set("hidden", opt.hidden);
  cfg.set("symlog_targets", opt.symlog_targets);
  return cfg;
}

ValueOptions value_options_from_config(const Config& cfg) {
  ValueOptions opt;
  opt.feature_dim = cfg.integer("feature_dim", opt.feature_dim);
  opt.hidden = cfg.integer("hidden", opt.hidden);
  opt.symlog_targets = cfg.boolean("symlog_targets", opt.symlog_targets);
  return opt;
}

ValueFunctionImpl::ValueFunctionImpl(ValueOptions opts) : options(std::move(opts)) {
  options.validate();
  fc1_ = register_module("fc1", torch::nn::Linear(options.feature_dim, options.hidden));
  fc2_ = register_module("fc2", torch::nn::Linear(options.hidden, options.hidden));
  fc3_ = register_module("fc3", torch::nn::Linear(options.hidden, 1));
}

torch::Tensor ValueFunctionImpl::raw(torch::Tensor features) {
  LPS_CHECK(features.dim() == 2 && features.size(1) == options.feature_dim,
            "ValueFunction: expected [N, " << options.feature_dim << "] features, got "
                                           << features.sizes());
  auto h = torch::silu(fc1_->forward(features));
  h = torch::silu(fc2_->forward(h));
  return fc3_->forward(h).squeeze(-1);
}

torch::Tensor ValueFunctionImpl::value(torch::Tensor features) {
  auto out = raw(features);
  return options.symlog_targets ? symexp(out) : out;
}

torch::Tensor ValueFunctionImpl::loss(torch::Tensor features, torch::Tensor targets) {
  LPS_CHECK(targets.dim() == 1 && targets.size(0) == features.size(0),
            "ValueFunction::loss: targets must be [N] matching features");
  auto y = options.symlog_targets ? symlog(targets.detach()) : targets.detach();
  auto pred = raw(features);
  return (pred - y).pow(2).mean();
}

void save_value_function(const ValueFunction& vf, const std::filesystem::path& path,
                         const std::map<std::string, std::string>& extra_manifest) {
  Checkpoint ckpt;
  ckpt.manifest = extra_manifest;
  ckpt.manifest["kind"] = "value_function";
  const Config oc = value_options_to_config(vf->options);
  for (const auto& [key, value] : oc.items()) {
    ckpt.manifest["opt." + key] = value;
  }
  ckpt.tensors = named_tensors(*vf);
  save_checkpoint(path, ckpt);
}

LoadedValueFunction load_value_function(const std::filesystem::path& path) {
  auto ckpt = load_checkpoint(path);
  LPS_CHECK(ckpt.manifest.count("kind") && ckpt.manifest.at("kind") == "value_function",
            "load_value_function: " << path.string() << " is not a value-function checkpoint");
  Config cfg;
  for (const auto& [key, value] : ckpt.manifest) {
    if (key.rfind("opt.", 0) == 0) cfg.set(key.substr(4), value);
  }
  LoadedValueFunction out;
  out.model = ValueFunction(value_options_from_config(cfg));
  load_named_tensors(*out.model, ckpt.tensors);
  out.manifest = std::move(ckpt.manifest);
  return out;
}

}  // namespace lps::steering
