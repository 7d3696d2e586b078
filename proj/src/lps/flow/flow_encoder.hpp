#pragma once

#include <torch/torch.h>

#include <vector>

#include "lps/flow/flow_field.hpp"

namespace lps::flow {

// CNN trunk + MLP projection mapping a dense flow field to a vector the size
// of a raw robot action, so the world model can consume either
// interchangeably.
struct FlowEncoderParams {
  std::vector<int64_t> channels = {8, 16, 32, 32};  // stride-2 stages
  int64_t projection_width = 128;
  int64_t output_dim = 2;
  int64_t input_height = 64;
  int64_t input_width = 64;

  void validate() const;
};

struct FlowEncoderImpl : torch::nn::Module {
  explicit FlowEncoderImpl(FlowEncoderParams params);

  // [B, 2, H, W] normalized flow -> [B, output_dim].
  torch::Tensor forward(torch::Tensor flow);

  FlowEncoderParams params;
  torch::nn::Sequential trunk{nullptr};
  torch::nn::Linear proj_hidden{nullptr};
  torch::nn::Linear proj_out{nullptr};
};
TORCH_MODULE(FlowEncoder);

// [2, H, W] float tensor with displacements normalized by image width.
// Errors on non-finite entries (pre-encoding validation).
torch::Tensor flow_to_tensor(const FlowField& flow);

// Convenience single-sample path: validate, normalize, encode.
torch::Tensor encode_flow_action(FlowEncoder& encoder, const FlowField& flow);

}  // namespace lps::flow
