#pragma once

#include <torch/torch.h>

#include <vector>

namespace lps::wm {

// Stride-2 conv trunk ending in a LayerNormed linear embedding.
struct ConvEncoderImpl : torch::nn::Module {
  ConvEncoderImpl(int64_t in_channels, std::vector<int64_t> channels, int64_t embed_dim,
                  int64_t input_hw);

  // [B, C, H, W] float in [0,1] -> [B, embed_dim].
  torch::Tensor forward(torch::Tensor obs);

  torch::nn::Sequential trunk{nullptr};
  torch::nn::Linear head{nullptr};
  torch::nn::LayerNorm norm{nullptr};
  int64_t input_hw = 0;
  int64_t in_channels = 0;
};
TORCH_MODULE(ConvEncoder);

// Mirror of the encoder: feature vector -> image logits (unbounded; clamp to
// [0,1] when converting to pixels).
struct ConvDecoderImpl : torch::nn::Module {
  ConvDecoderImpl(int64_t feature_dim, std::vector<int64_t> channels, int64_t out_channels,
                  int64_t output_hw);

  // [B, feature_dim] -> [B, out_channels, H, W].
  torch::Tensor forward(torch::Tensor feature);

  torch::nn::Linear head{nullptr};
  torch::nn::Sequential trunk{nullptr};
  int64_t base_hw = 0;
  int64_t base_channels = 0;
};
TORCH_MODULE(ConvDecoder);

}  // namespace lps::wm
