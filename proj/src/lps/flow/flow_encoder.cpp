#include "lps/flow/flow_encoder.hpp"

#include <cmath>

#include "lps/core/check.hpp"

namespace lps::flow {

void FlowEncoderParams::validate() const {
  LPS_CHECK(!channels.empty(), "flow encoder needs at least one conv stage");
  for (int64_t c : channels) LPS_CHECK(c >= 1, "conv channels must be positive");
  LPS_CHECK(projection_width >= 1, "projection_width must be positive");
  LPS_CHECK(output_dim >= 1, "output_dim must be positive");
  const int64_t factor = int64_t{1} << channels.size();
  LPS_CHECK(input_height % factor == 0 && input_width % factor == 0,
            "input size must be divisible by 2^stages");
}

FlowEncoderImpl::FlowEncoderImpl(FlowEncoderParams p) : params(std::move(p)) {
  params.validate();
  trunk = torch::nn::Sequential();
  int64_t in_ch = 2;
  for (size_t i = 0; i < params.channels.size(); ++i) {
    trunk->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in_ch, params.channels[i], 3).stride(2).padding(1)));
    trunk->push_back(torch::nn::SiLU());
    in_ch = params.channels[i];
  }
  register_module("trunk", trunk);

  const int64_t factor = int64_t{1} << params.channels.size();
  const int64_t flat =
      params.channels.back() * (params.input_height / factor) * (params.input_width / factor);
  proj_hidden = register_module("proj_hidden", torch::nn::Linear(flat, params.projection_width));
  proj_out = register_module("proj_out", torch::nn::Linear(params.projection_width, params.output_dim));
}

torch::Tensor FlowEncoderImpl::forward(torch::Tensor flow) {
  LPS_CHECK(flow.dim() == 4 && flow.size(1) == 2, "flow tensor must be [B, 2, H, W]");
  LPS_CHECK(flow.size(2) == params.input_height && flow.size(3) == params.input_width,
            "flow tensor size does not match encoder params");
  torch::Tensor h = trunk->forward(flow);
  h = h.flatten(1);
  h = torch::silu(proj_hidden->forward(h));
  return proj_out->forward(h);
}

torch::Tensor flow_to_tensor(const FlowField& flow) {
  check_flow_field(flow);  // rejects non-finite entries before encoding
  const int64_t h = flow.height;
  const int64_t w = flow.width;
  torch::Tensor t = torch::empty({2, h, w}, torch::kFloat32);
  auto acc = t.accessor<float, 3>();
  const float scale = 1.0f / static_cast<float>(flow.width);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      acc[0][y][x] = flow.u_at(static_cast<int>(y), static_cast<int>(x)) * scale;
      acc[1][y][x] = flow.v_at(static_cast<int>(y), static_cast<int>(x)) * scale;
    }
  }
  return t;
}

torch::Tensor encode_flow_action(FlowEncoder& encoder, const FlowField& flow) {
  torch::Tensor input = flow_to_tensor(flow).unsqueeze(0);
  return encoder->forward(input).squeeze(0);
}

}  // namespace lps::flow
