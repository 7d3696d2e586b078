#pragma once

#include <cstdint>
#include <cstring>

namespace lps {

// IEEE 754 binary16 conversion, round-half-up. Used for compact on-disk
// tensors whose values comfortably fit half range (e.g. pixel flow).
inline uint16_t half_from_float(float f) {
  uint32_t x;
  std::memcpy(&x, &f, 4);
  const uint32_t sign = (x >> 16) & 0x8000u;
  uint32_t mant = x & 0x007fffffu;
  const uint32_t exp8 = (x >> 23) & 0xffu;
  if (exp8 == 0xffu) return static_cast<uint16_t>(sign | 0x7c00u | (mant ? 0x200u : 0u));
  const int32_t exp = static_cast<int32_t>(exp8) - 127 + 15;
  if (exp >= 31) return static_cast<uint16_t>(sign | 0x7c00u);
  if (exp <= 0) {
    if (exp < -10) return static_cast<uint16_t>(sign);
    mant |= 0x00800000u;
    const uint32_t shift = static_cast<uint32_t>(14 - exp);
    uint16_t sub = static_cast<uint16_t>(mant >> shift);
    if ((mant >> (shift - 1)) & 1u) ++sub;
    return static_cast<uint16_t>(sign | sub);
  }
  uint16_t h = static_cast<uint16_t>(sign | (static_cast<uint32_t>(exp) << 10) | (mant >> 13));
  if (mant & 0x1000u) ++h;  // rounding carry may bump the exponent, which is correct
  return h;
}

inline float float_from_half(uint16_t h) {
  const uint32_t sign = static_cast<uint32_t>(h & 0x8000u) << 16;
  const uint32_t exp = (h >> 10) & 0x1fu;
  const uint32_t mant = h & 0x3ffu;
  uint32_t x;
  if (exp == 0) {
    if (mant == 0) {
      x = sign;
    } else {
      int e = 0;
      uint32_t m = mant;
      while (!(m & 0x400u)) {
        ++e;
        m <<= 1;
      }
      m &= 0x3ffu;
      x = sign | (static_cast<uint32_t>(127 - 15 - e) << 23) | (m << 13);
    }
  } else if (exp == 31) {
    x = sign | 0x7f800000u | (mant << 13);
  } else {
    x = sign | ((exp - 15 + 127) << 23) | (mant << 13);
  }
  float f;
  std::memcpy(&f, &x, 4);
  return f;
}

}  // namespace lps
