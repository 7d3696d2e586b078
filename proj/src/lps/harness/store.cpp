#include "lps/harness/store.hpp"

#include <cstdlib>

#include "lps/core/check.hpp"
#include "lps/core/hash.hpp"

namespace lps::harness {

namespace {
constexpr const char* kMarkerName = "stage.txt";
}

std::filesystem::path resolve_cache_root(const Config& cfg) {
  if (cfg.has("cache_dir")) return cfg.str("cache_dir");
  if (const char* env = std::getenv("LATENT_STEER_CACHE"); env != nullptr && *env != '\0') {
    return env;
  }
  return std::filesystem::path(cfg.str("out")) / "cache";
}

Store::Store(std::filesystem::path cache_root) : root_(std::move(cache_root)) {
  std::filesystem::create_directories(root_);
}

std::filesystem::path Store::stage_dir(const std::string& stage, uint64_t input_hash) const {
  LPS_CHECK(!stage.empty(), "Store: empty stage name");
  auto dir = root_ / stage / hex64(input_hash);
  std::filesystem::create_directories(dir);
  return dir;
}

bool Store::stage_done(const std::filesystem::path& dir) const {
  const auto marker = dir / kMarkerName;
  if (!std::filesystem::exists(marker)) return false;
  return Config::from_file(marker).boolean("done", false);
}

void Store::mark_stage_done(const std::filesystem::path& dir, const Config& info) const {
  Config marker = info;
  marker.set("done", true);
  marker.save(dir / kMarkerName);
}

Config Store::stage_info(const std::filesystem::path& dir) const {
  LPS_CHECK(stage_done(dir), "Store: stage not complete: " << dir.string());
  return Config::from_file(dir / kMarkerName);
}

}  // namespace lps::harness
