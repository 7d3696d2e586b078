#pragma once

#include <cstdint>
#include <cstring>
#include <string>

namespace lps {

// FNV-1a over raw bytes. Stable across platforms; used for content hashes
// and config hashes, never for security.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t seed = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), seed);
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic seed derivation: worker/episode streams never depend on
// scheduling, only on (base, index...) chains.
inline uint64_t derive_seed(uint64_t base, uint64_t a) {
  return splitmix64(splitmix64(base) ^ (0x9e3779b97f4a7c15ull + a));
}
inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b) {
  return derive_seed(derive_seed(base, a), b);
}
inline uint64_t derive_seed(uint64_t base, const std::string& tag) {
  return derive_seed(base, fnv1a64(tag));
}
inline uint64_t derive_seed(uint64_t base, const std::string& tag, uint64_t a) {
  return derive_seed(derive_seed(base, fnv1a64(tag)), a);
}

inline std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace lps
