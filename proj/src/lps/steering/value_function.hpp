#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <string>

#include "lps/core/config.hpp"

namespace lps::steering {

struct ValueOptions {
  int64_t feature_dim = 320;
  int64_t hidden = 256;
  // When true the net regresses symlog-compressed targets and value() applies
  // symexp; when false it regresses plain targets.
  bool symlog_targets = true;

  void validate() const;
};

Config value_options_to_config(const ValueOptions& opt);
ValueOptions value_options_from_config(const Config& cfg);

// Three-layer MLP state-value head over world-model features.
class ValueFunctionImpl : public torch::nn::Module {
 public:
  explicit ValueFunctionImpl(ValueOptions opts);

  // Raw network output in regression space: [N, D] -> [N].
  torch::Tensor raw(torch::Tensor features);

  // Value estimate in reward units ([N, D] -> [N]); inverts the symlog
  // compression when enabled.
  torch::Tensor value(torch::Tensor features);

  // Squared error against (optionally symlog-compressed) scalar targets [N].
  torch::Tensor loss(torch::Tensor features, torch::Tensor targets);

  ValueOptions options;

 private:
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr}, fc3_{nullptr};
};

TORCH_MODULE(ValueFunction);

void save_value_function(const ValueFunction& vf, const std::filesystem::path& path,
                         const std::map<std::string, std::string>& extra_manifest = {});
struct LoadedValueFunction {
  ValueFunction model{nullptr};
  std::map<std::string, std::string> manifest;
};
LoadedValueFunction load_value_function(const std::filesystem::path& path);

}  // namespace lps::steering
