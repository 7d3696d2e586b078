#pragma once

#include <torch/torch.h>

#include <cmath>

namespace lps {

inline double symlog(double x) { return std::copysign(std::log1p(std::abs(x)), x); }
inline double symexp(double x) { return std::copysign(std::expm1(std::abs(x)), x); }

inline torch::Tensor symlog(const torch::Tensor& x) {
  return torch::sign(x) * torch::log1p(torch::abs(x));
}
inline torch::Tensor symexp(const torch::Tensor& x) {
  return torch::sign(x) * torch::expm1(torch::abs(x));
}

}  // namespace lps
