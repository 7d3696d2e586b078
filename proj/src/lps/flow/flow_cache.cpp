#include "lps/flow/flow_cache.hpp"

#include <cstring>
#include <iostream>

#include "lps/core/check.hpp"
#include "lps/core/config.hpp"
#include "lps/core/fs_util.hpp"
#include "lps/core/half.hpp"
#include "lps/core/hash.hpp"
#include "lps/envs/shard.hpp"
#include "lps/flow/estimator.hpp"

namespace fs = std::filesystem;

namespace lps::flow {
namespace {

constexpr char kBlobMagic[8] = {'L', 'S', 'F', 'L', 'O', 'W', '0', '1'};
constexpr const char* kHashTag = "flow_blob_v1";

std::string blob_name(int index) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "ep_%06d.flow", index);
  return buf;
}

std::string sidecar_name(int index) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "ep_%06d.hash", index);
  return buf;
}

void append_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

uint32_t read_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

// Hash of the record's frame bytes on disk plus the estimator identity; no
// image decode needed to test cache validity.
uint64_t record_content_hash(const fs::path& record_dir, const Config& shard_manifest,
                             const std::string& estimator) {
  const Config meta = Config::from_file((record_dir / "meta.txt").string());
  const int t = static_cast<int>(meta.integer("length"));
  uint64_t h = fnv1a64(kHashTag);
  h = fnv1a64(estimator.data(), estimator.size(), h);
  const std::string codec = shard_manifest.str("image_codec");
  if (codec == "raw") {
    const auto bytes = read_bytes_u8((record_dir / "frames.bin").string());
    h = fnv1a64(bytes.data(), bytes.size(), h);
  } else {
    for (int i = 0; i <= t; ++i) {
      char buf[24];
      std::snprintf(buf, sizeof(buf), "frame_%05d.png", i);
      const auto bytes = read_bytes_u8((record_dir / buf).string());
      h = fnv1a64(bytes.data(), bytes.size(), h);
    }
  }
  return h;
}

std::vector<uint8_t> encode_blob(const std::vector<FlowField>& fields) {
  LPS_CHECK(!fields.empty(), "cannot encode an empty flow episode");
  const int t = static_cast<int>(fields.size());
  const int h = fields[0].height;
  const int w = fields[0].width;
  std::vector<uint8_t> out;
  out.reserve(8 + 12 + static_cast<size_t>(t) * h * w * 4);
  out.insert(out.end(), kBlobMagic, kBlobMagic + 8);
  append_u32(out, static_cast<uint32_t>(t));
  append_u32(out, static_cast<uint32_t>(h));
  append_u32(out, static_cast<uint32_t>(w));
  for (const auto& f : fields) {
    LPS_CHECK(f.height == h && f.width == w, "ragged flow shapes within episode");
    for (size_t i = 0; i < f.u.size(); ++i) {
      const uint16_t hu = half_from_float(f.u[i]);
      const uint16_t hv = half_from_float(f.v[i]);
      out.push_back(static_cast<uint8_t>(hu & 0xff));
      out.push_back(static_cast<uint8_t>(hu >> 8));
      out.push_back(static_cast<uint8_t>(hv & 0xff));
      out.push_back(static_cast<uint8_t>(hv >> 8));
    }
  }
  return out;
}

}  // namespace

fs::path default_flow_dir(const fs::path& shard_dir) { return shard_dir / "flow"; }

FlowCacheReport precompute_flow_shard(const fs::path& shard_dir, const std::string& estimator,
                                      fs::path flow_dir) {
  const Config manifest = envs::read_shard_manifest(shard_dir);
  const int n = static_cast<int>(manifest.integer("n_episodes"));
  if (flow_dir.empty()) flow_dir = default_flow_dir(shard_dir);
  fs::create_directories(flow_dir);

  FlowCacheReport report;
  report.episodes = n;
  for (int i = 0; i < n; ++i) {
    const fs::path blob_path = flow_dir / blob_name(i);
    const fs::path sidecar_path = flow_dir / sidecar_name(i);
    try {
      const uint64_t content =
          record_content_hash(envs::episode_dir(shard_dir, i), manifest, estimator);
      const std::string content_hex = hex64(content);
      if (fs::exists(blob_path) && fs::exists(sidecar_path)) {
        std::string cached = read_text(sidecar_path.string());
        while (!cached.empty() && (cached.back() == '\n' || cached.back() == '\r')) {
          cached.pop_back();
        }
        if (cached == content_hex) {
          ++report.cache_hits;
          continue;
        }
      }

      const envs::Episode ep = envs::read_shard_episode(shard_dir, i, manifest);
      LPS_CHECK(ep.observations.size() >= 2, "episode has fewer than 2 frames");
      std::vector<FlowField> fields;
      fields.reserve(ep.length());
      for (int s = 0; s < ep.length(); ++s) {
        fields.push_back(compute_flow(ep.observations[s], ep.observations[s + 1], estimator));
      }
      atomic_write_bytes(blob_path.string(), encode_blob(fields));
      atomic_write_text(sidecar_path.string(), content_hex + "\n");
      ++report.computed;
    } catch (const std::exception& e) {
      std::cerr << "[flow] skipping corrupt episode " << i << " in " << shard_dir.string()
                << ": " << e.what() << "\n";
      report.skipped.push_back(i);
    }
  }

  Config cache_manifest;
  cache_manifest.set("schema", "flow_cache_v1");
  cache_manifest.set("estimator", estimator);
  cache_manifest.set("n_episodes", static_cast<int64_t>(n));
  cache_manifest.set("n_skipped", static_cast<int64_t>(report.skipped.size()));
  if (!report.skipped.empty()) {
    std::string joined;
    for (size_t k = 0; k < report.skipped.size(); ++k) {
      if (k > 0) joined += ",";
      joined += std::to_string(report.skipped[k]);
    }
    cache_manifest.set("skipped", joined);
  }
  cache_manifest.save((flow_dir / "manifest.txt").string());
  return report;
}

std::vector<FlowField> read_flow_episode(const fs::path& flow_dir, int index) {
  const std::vector<uint8_t> bytes = read_bytes_u8((flow_dir / blob_name(index)).string());
  LPS_CHECK(bytes.size() >= 20 && std::memcmp(bytes.data(), kBlobMagic, 8) == 0,
            "not a flow blob: " + (flow_dir / blob_name(index)).string());
  const int t = static_cast<int>(read_u32(bytes.data() + 8));
  const int h = static_cast<int>(read_u32(bytes.data() + 12));
  const int w = static_cast<int>(read_u32(bytes.data() + 16));
  const size_t expected = 20 + static_cast<size_t>(t) * h * w * 4;
  LPS_CHECK(bytes.size() == expected, "flow blob size mismatch");
  std::vector<FlowField> fields;
  fields.reserve(t);
  const uint8_t* p = bytes.data() + 20;
  for (int s = 0; s < t; ++s) {
    FlowField f(h, w);
    for (size_t i = 0; i < f.u.size(); ++i) {
      const uint16_t hu = static_cast<uint16_t>(p[0] | (p[1] << 8));
      const uint16_t hv = static_cast<uint16_t>(p[2] | (p[3] << 8));
      f.u[i] = float_from_half(hu);
      f.v[i] = float_from_half(hv);
      p += 4;
    }
    fields.push_back(std::move(f));
  }
  return fields;
}

}  // namespace lps::flow
