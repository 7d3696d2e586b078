#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lps/core/check.hpp"

namespace lps {

// Write-temp-then-rename so readers never observe partial files.
inline void atomic_write_bytes(const std::filesystem::path& path, const void* data, size_t n) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    LPS_CHECK(out.good(), "cannot open for write: " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    LPS_CHECK(out.good(), "short write: " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
  atomic_write_bytes(path, text.data(), text.size());
}

inline void atomic_write_bytes(const std::filesystem::path& path,
                               const std::vector<uint8_t>& bytes) {
  atomic_write_bytes(path, bytes.data(), bytes.size());
}

inline std::vector<char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  LPS_CHECK(in.good(), "cannot open: " + path.string());
  const auto n = static_cast<size_t>(in.tellg());
  in.seekg(0);
  std::vector<char> buf(n);
  in.read(buf.data(), static_cast<std::streamsize>(n));
  LPS_CHECK(in.good(), "short read: " + path.string());
  return buf;
}

inline std::vector<uint8_t> read_bytes_u8(const std::filesystem::path& path) {
  auto b = read_bytes(path);
  return std::vector<uint8_t>(b.begin(), b.end());
}

inline std::string read_text(const std::filesystem::path& path) {
  auto b = read_bytes(path);
  return std::string(b.begin(), b.end());
}

}  // namespace lps
