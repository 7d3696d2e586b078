#include "lps/envs/shard.hpp"

#include <cstring>
#include <set>

#include "lps/core/check.hpp"
#include "lps/core/fs_util.hpp"
#include "lps/core/png_io.hpp"

namespace fs = std::filesystem;

namespace lps::envs {
namespace {

std::string record_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "ep_%06d", index);
  return buf;
}

std::string frame_name(int index) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "frame_%05d.png", index);
  return buf;
}

}  // namespace

Episode read_shard_episode(const fs::path& shard_dir, int index, const Config& manifest) {
  const fs::path dir = episode_dir(shard_dir, index);
  Episode ep;
  const Config meta = Config::from_file((dir / "meta.txt").string());
  const int t = static_cast<int>(meta.integer("length"));
  const int action_dim = static_cast<int>(manifest.integer("action_dim"));
  const int height = static_cast<int>(manifest.integer("height"));
  const int width = static_cast<int>(manifest.integer("width"));
  ep.success = meta.boolean("success");
  ep.embodiment_id = meta.str("embodiment_id");
  ep.rewards = read_f32_file(dir / "rewards.bin");
  LPS_CHECK(static_cast<int>(ep.rewards.size()) == t, "rewards.bin length mismatch in " + dir.string());

  const std::vector<float> flat = read_f32_file(dir / "actions.bin");
  LPS_CHECK(static_cast<int>(flat.size()) == t * action_dim,
            "actions.bin length mismatch in " + dir.string());
  ep.actions.resize(t);
  for (int i = 0; i < t; ++i) {
    ep.actions[i].assign(flat.begin() + static_cast<size_t>(i) * action_dim,
                         flat.begin() + static_cast<size_t>(i + 1) * action_dim);
  }

  const std::string codec = manifest.str("image_codec");
  const size_t frame_bytes = static_cast<size_t>(height) * width * 3;
  ep.observations.reserve(t + 1);
  if (codec == "raw") {
    const std::vector<uint8_t> blob = read_bytes_u8((dir / "frames.bin").string());
    LPS_CHECK(blob.size() == frame_bytes * (t + 1), "frames.bin size mismatch in " + dir.string());
    for (int i = 0; i <= t; ++i) {
      Image img(height, width);
      std::memcpy(img.data.data(), blob.data() + frame_bytes * i, frame_bytes);
      ep.observations.push_back(std::move(img));
    }
  } else if (codec == "png") {
    for (int i = 0; i <= t; ++i) {
      Image img = png_load((dir / frame_name(i)).string());
      LPS_CHECK(img.height == height && img.width == width,
                "frame shape mismatch in " + dir.string());
      ep.observations.push_back(std::move(img));
    }
  } else {
    LPS_FAIL("unknown image_codec '" + codec + "' in " + dir.string());
  }
  return ep;
}

void write_f32_file(const fs::path& path, const std::vector<float>& values) {
  std::vector<uint8_t> bytes(values.size() * 4);
  for (size_t i = 0; i < values.size(); ++i) {
    uint32_t u;
    std::memcpy(&u, &values[i], 4);
    bytes[4 * i + 0] = static_cast<uint8_t>(u & 0xff);
    bytes[4 * i + 1] = static_cast<uint8_t>((u >> 8) & 0xff);
    bytes[4 * i + 2] = static_cast<uint8_t>((u >> 16) & 0xff);
    bytes[4 * i + 3] = static_cast<uint8_t>((u >> 24) & 0xff);
  }
  atomic_write_bytes(path.string(), bytes);
}

std::vector<float> read_f32_file(const fs::path& path) {
  const std::vector<uint8_t> bytes = read_bytes_u8(path.string());
  LPS_CHECK(bytes.size() % 4 == 0, "float32 file has trailing bytes: " + path.string());
  std::vector<float> values(bytes.size() / 4);
  for (size_t i = 0; i < values.size(); ++i) {
    const uint32_t u = static_cast<uint32_t>(bytes[4 * i]) |
                       (static_cast<uint32_t>(bytes[4 * i + 1]) << 8) |
                       (static_cast<uint32_t>(bytes[4 * i + 2]) << 16) |
                       (static_cast<uint32_t>(bytes[4 * i + 3]) << 24);
    std::memcpy(&values[i], &u, 4);
  }
  return values;
}

fs::path episode_dir(const fs::path& shard_dir, int index) {
  return shard_dir / record_name(index);
}

void write_shard(const fs::path& dir, const std::vector<Episode>& episodes,
                 const Config& extra_manifest, const std::string& image_codec) {
  LPS_CHECK(image_codec == "png" || image_codec == "raw",
            "image_codec must be 'png' or 'raw', got '" + image_codec + "'");
  LPS_CHECK(!episodes.empty(), "refusing to write an empty shard");
  for (const auto& ep : episodes) check_episode(ep);

  const Image& first = episodes.front().observations.front();
  std::set<std::string> ids;
  for (const auto& ep : episodes) {
    ids.insert(ep.embodiment_id);
    LPS_CHECK(ep.observations.front().same_shape(first), "mixed frame shapes across episodes");
    LPS_CHECK(ep.action_dim() == episodes.front().action_dim(),
              "mixed action dims across episodes");
  }

  // Rebuild from scratch so reruns cannot leave stale records behind.
  if (fs::exists(dir)) fs::remove_all(dir);
  fs::create_directories(dir);

  Config manifest = extra_manifest;
  manifest.set("schema", "episode_shard_v1");
  manifest.set("image_codec", image_codec);
  manifest.set("n_episodes", static_cast<int64_t>(episodes.size()));
  manifest.set("height", static_cast<int64_t>(first.height));
  manifest.set("width", static_cast<int64_t>(first.width));
  manifest.set("action_dim", static_cast<int64_t>(episodes.front().action_dim()));
  manifest.set("embodiment_id", ids.size() == 1 ? *ids.begin() : std::string("mixed"));
  manifest.save((dir / "manifest.txt").string());

  for (size_t i = 0; i < episodes.size(); ++i) {
    const Episode& ep = episodes[i];
    const fs::path rec = episode_dir(dir, static_cast<int>(i));
    fs::create_directories(rec);

    Config meta;
    meta.set("length", static_cast<int64_t>(ep.length()));
    meta.set("success", ep.success);
    meta.set("embodiment_id", ep.embodiment_id);
    meta.save((rec / "meta.txt").string());

    std::vector<float> flat;
    flat.reserve(static_cast<size_t>(ep.length()) * ep.action_dim());
    for (const auto& a : ep.actions) flat.insert(flat.end(), a.begin(), a.end());
    write_f32_file(rec / "actions.bin", flat);
    write_f32_file(rec / "rewards.bin", ep.rewards);

    if (image_codec == "raw") {
      std::vector<uint8_t> blob;
      blob.reserve(ep.observations.size() * ep.observations.front().data.size());
      for (const auto& obs : ep.observations) {
        blob.insert(blob.end(), obs.data.begin(), obs.data.end());
      }
      atomic_write_bytes((rec / "frames.bin").string(), blob);
    } else {
      for (size_t f = 0; f < ep.observations.size(); ++f) {
        png_save((rec / frame_name(static_cast<int>(f))).string(), ep.observations[f]);
      }
    }
  }
}

Config read_shard_manifest(const fs::path& dir) {
  return Config::from_file((dir / "manifest.txt").string());
}

Shard read_shard(const fs::path& dir) {
  Shard shard;
  shard.manifest = read_shard_manifest(dir);
  LPS_CHECK(shard.manifest.str("schema") == "episode_shard_v1",
            "not an episode shard: " + dir.string());
  const int n = static_cast<int>(shard.manifest.integer("n_episodes"));
  shard.episodes.reserve(n);
  for (int i = 0; i < n; ++i) {
    shard.episodes.push_back(read_shard_episode(dir, i, shard.manifest));
  }
  return shard;
}

}  // namespace lps::envs
