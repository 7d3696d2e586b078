#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lps/core/config.hpp"
#include "lps/envs/episode.hpp"

namespace lps::envs {

// On-disk episode container: a directory with a key-value manifest plus one
// ep_NNNNNN/ record per episode (meta.txt, actions.bin and rewards.bin as
// little-endian float32, frames as PNGs or a single raw uint8 blob,
// controlled by manifest key image_codec in {png, raw}). Writes are
// deterministic: the same episodes produce byte-identical directories.
struct Shard {
  Config manifest;
  std::vector<Episode> episodes;
};

void write_shard(const std::filesystem::path& dir, const std::vector<Episode>& episodes,
                 const Config& extra_manifest, const std::string& image_codec = "png");

Shard read_shard(const std::filesystem::path& dir);

// Manifest alone, for cheap metadata queries.
Config read_shard_manifest(const std::filesystem::path& dir);

// One episode record by index (decoded from either codec). Throws on a
// corrupt record, letting callers decide between abort and skip.
Episode read_shard_episode(const std::filesystem::path& shard_dir, int index,
                           const Config& manifest);

std::filesystem::path episode_dir(const std::filesystem::path& shard_dir, int index);

// Little-endian float32 array files used throughout the on-disk formats.
void write_f32_file(const std::filesystem::path& path, const std::vector<float>& values);
std::vector<float> read_f32_file(const std::filesystem::path& path);

}  // namespace lps::envs
