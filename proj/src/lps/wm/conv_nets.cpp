#include "lps/wm/conv_nets.hpp"

#include "lps/core/check.hpp"

namespace lps::wm {

ConvEncoderImpl::ConvEncoderImpl(int64_t in_ch, std::vector<int64_t> channels, int64_t embed_dim,
                                 int64_t hw)
    : input_hw(hw), in_channels(in_ch) {
  LPS_CHECK(!channels.empty(), "encoder needs at least one conv stage");
  const int64_t factor = int64_t{1} << channels.size();
  LPS_CHECK(hw % factor == 0, "input size must be divisible by 2^stages");
  trunk = torch::nn::Sequential();
  int64_t prev = in_ch;
  for (int64_t ch : channels) {
    trunk->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(prev, ch, 3).stride(2).padding(1)));
    trunk->push_back(torch::nn::SiLU());
    prev = ch;
  }
  register_module("trunk", trunk);
  const int64_t spatial = hw / factor;
  head = register_module("head", torch::nn::Linear(prev * spatial * spatial, embed_dim));
  norm = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({embed_dim})));
}

torch::Tensor ConvEncoderImpl::forward(torch::Tensor obs) {
  LPS_CHECK(obs.dim() == 4 && obs.size(1) == in_channels && obs.size(2) == input_hw &&
                obs.size(3) == input_hw,
            "encoder input shape mismatch");
  torch::Tensor h = trunk->forward(obs);
  return norm->forward(head->forward(h.flatten(1)));
}

ConvDecoderImpl::ConvDecoderImpl(int64_t feature_dim, std::vector<int64_t> channels,
                                 int64_t out_channels, int64_t output_hw) {
  LPS_CHECK(!channels.empty(), "decoder needs at least one deconv stage");
  const int64_t factor = int64_t{1} << channels.size();
  LPS_CHECK(output_hw % factor == 0, "output size must be divisible by 2^stages");
  base_hw = output_hw / factor;
  base_channels = channels.back();
  head = register_module("head",
                         torch::nn::Linear(feature_dim, base_channels * base_hw * base_hw));
  trunk = torch::nn::Sequential();
  // Walk the channel list backwards, mirroring the encoder's progression.
  for (size_t i = channels.size(); i-- > 0;) {
    const int64_t in_ch = channels[i];
    const int64_t out_ch = i == 0 ? out_channels : channels[i - 1];
    trunk->push_back(torch::nn::ConvTranspose2d(
        torch::nn::ConvTranspose2dOptions(in_ch, out_ch, 4).stride(2).padding(1)));
    if (i != 0) trunk->push_back(torch::nn::SiLU());
  }
  register_module("trunk", trunk);
}

torch::Tensor ConvDecoderImpl::forward(torch::Tensor feature) {
  LPS_CHECK(feature.dim() == 2, "decoder expects [B, feature_dim]");
  torch::Tensor h = head->forward(feature);
  h = h.view({feature.size(0), base_channels, base_hw, base_hw});
  return trunk->forward(h);
}

}  // namespace lps::wm
