#include "lps/core/png_io.hpp"

#include <zlib.h>

#include <cstring>

#include "lps/core/check.hpp"
#include "lps/core/fs_util.hpp"

namespace lps {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void write_chunk(std::vector<uint8_t>& out, const char type[4], const uint8_t* data, size_t n) {
  put_u32(out, static_cast<uint32_t>(n));
  const size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  if (n) out.insert(out.end(), data, data + n);
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0, out.data() + start, static_cast<uInt>(4 + n)));
  put_u32(out, crc);
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

std::vector<uint8_t> png_encode(const Image& img) {
  LPS_CHECK(img.height > 0 && img.width > 0, "png_encode: empty image");
  const size_t row = static_cast<size_t>(img.width) * 3;
  std::vector<uint8_t> raw((row + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw[y * (row + 1)] = 0;  // filter type 0
    std::memcpy(&raw[y * (row + 1) + 1], &img.data[y * row], row);
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(bound);
  const int rc = compress2(compressed.data(), &bound, raw.data(),
                           static_cast<uLong>(raw.size()), 6);
  LPS_CHECK(rc == Z_OK, "png_encode: deflate failed");
  compressed.resize(bound);

  std::vector<uint8_t> out;
  static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  out.insert(out.end(), sig, sig + 8);

  uint8_t ihdr[13];
  ihdr[0] = static_cast<uint8_t>(img.width >> 24);
  ihdr[1] = static_cast<uint8_t>(img.width >> 16);
  ihdr[2] = static_cast<uint8_t>(img.width >> 8);
  ihdr[3] = static_cast<uint8_t>(img.width);
  ihdr[4] = static_cast<uint8_t>(img.height >> 24);
  ihdr[5] = static_cast<uint8_t>(img.height >> 16);
  ihdr[6] = static_cast<uint8_t>(img.height >> 8);
  ihdr[7] = static_cast<uint8_t>(img.height);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // color type: truecolor
  ihdr[10] = 0;  // compression
  ihdr[11] = 0;  // filter
  ihdr[12] = 0;  // interlace
  write_chunk(out, "IHDR", ihdr, sizeof(ihdr));
  write_chunk(out, "IDAT", compressed.data(), compressed.size());
  write_chunk(out, "IEND", nullptr, 0);
  return out;
}

Image png_decode(const uint8_t* data, size_t n) {
  LPS_CHECK(n > 8 && data[0] == 137 && data[1] == 'P' && data[2] == 'N' && data[3] == 'G',
            "png_decode: not a PNG");
  size_t pos = 8;
  int width = 0, height = 0;
  std::vector<uint8_t> idat;
  while (pos + 12 <= n) {
    const uint32_t len = get_u32(data + pos);
    const char* type = reinterpret_cast<const char*>(data + pos + 4);
    const uint8_t* payload = data + pos + 8;
    LPS_CHECK(pos + 12 + len <= n, "png_decode: truncated chunk");
    if (std::memcmp(type, "IHDR", 4) == 0) {
      LPS_CHECK(len == 13, "png_decode: bad IHDR");
      width = static_cast<int>(get_u32(payload));
      height = static_cast<int>(get_u32(payload + 4));
      LPS_CHECK(payload[8] == 8 && payload[9] == 2 && payload[12] == 0,
                "png_decode: only 8-bit non-interlaced RGB supported");
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  LPS_CHECK(width > 0 && height > 0 && !idat.empty(), "png_decode: missing IHDR/IDAT");

  const size_t row = static_cast<size_t>(width) * 3;
  std::vector<uint8_t> raw((row + 1) * height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  const int rc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
  LPS_CHECK(rc == Z_OK && raw_len == raw.size(), "png_decode: inflate failed");

  Image img(height, width);
  std::vector<uint8_t> prev(row, 0);
  for (int y = 0; y < height; ++y) {
    const uint8_t filter = raw[y * (row + 1)];
    const uint8_t* src = &raw[y * (row + 1) + 1];
    uint8_t* dst = &img.data[y * row];
    for (size_t x = 0; x < row; ++x) {
      const int a = x >= 3 ? dst[x - 3] : 0;
      const int b = prev[x];
      const int c = x >= 3 ? prev[x - 3] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: LPS_FAIL("png_decode: unknown filter type");
      }
      dst[x] = static_cast<uint8_t>(v & 0xff);
    }
    std::memcpy(prev.data(), dst, row);
  }
  return img;
}

void png_save(const std::filesystem::path& path, const Image& img) {
  auto bytes = png_encode(img);
  atomic_write_bytes(path, bytes.data(), bytes.size());
}

Image png_load(const std::filesystem::path& path) {
  auto bytes = read_bytes(path);
  return png_decode(reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size());
}

}  // namespace lps
