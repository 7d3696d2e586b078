#pragma once

#include <filesystem>
#include <vector>

#include "lps/core/image.hpp"

namespace lps {

// Minimal 8-bit RGB PNG codec (zlib-backed). The encoder always emits filter
// type 0 scanlines at a fixed compression level, so outputs are byte-stable.
std::vector<uint8_t> png_encode(const Image& img);
Image png_decode(const uint8_t* data, size_t n);

void png_save(const std::filesystem::path& path, const Image& img);
Image png_load(const std::filesystem::path& path);

}  // namespace lps
