#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <string>

namespace lps {

// Checkpoint payload: named parameter tensors plus a small text manifest
// (step count, mode flags, config hash). Binary layout is fixed and
// little-endian; files are written atomically.
struct Checkpoint {
  std::map<std::string, torch::Tensor> tensors;
  std::map<std::string, std::string> manifest;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies named parameters of a module into / out of a checkpoint tensor map.
std::map<std::string, torch::Tensor> named_tensors(const torch::nn::Module& m);
void load_named_tensors(torch::nn::Module& m, const std::map<std::string, torch::Tensor>& t,
                        const std::string& prefix = "");

// Order-stable FNV hash over all parameter bytes; used by the
// gradient-isolation checks.
uint64_t parameter_hash(const torch::nn::Module& m);

}  // namespace lps
