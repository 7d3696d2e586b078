#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lps/core/config.hpp"

namespace lps::harness {

// Cache root resolution order: config key "cache_dir", then the
// LATENT_STEER_CACHE environment variable, then "<out>/cache".
std::filesystem::path resolve_cache_root(const Config& cfg);

// Content-addressed stage store. Every pipeline stage writes its artifacts
// into cache_root/<stage>/<input-hash>/ and finishes by writing a marker
// file; a present marker means the directory is complete and reusable. A
// stage directory without a marker is a preserved partial artifact from an
// interrupted run and is rebuilt in place.
class Store {
 public:
  explicit Store(std::filesystem::path cache_root);

  const std::filesystem::path& root() const { return root_; }

  // cache_root/<stage>/<hash hex>; parent directories are created.
  std::filesystem::path stage_dir(const std::string& stage, uint64_t input_hash) const;

  bool stage_done(const std::filesystem::path& dir) const;

  // Writes the completion marker (atomically, as the stage's final step).
  // `info` entries — input echoes, lineage hashes — are stored in the marker.
  void mark_stage_done(const std::filesystem::path& dir, const Config& info) const;

  // Marker contents of a completed stage; errors if the stage is not done.
  Config stage_info(const std::filesystem::path& dir) const;

 private:
  std::filesystem::path root_;
};

}  // namespace lps::harness
