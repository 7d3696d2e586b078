#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lps/core/config.hpp"
#include "lps/harness/report.hpp"
#include "lps/harness/store.hpp"

namespace lps::harness {

// Every pipeline knob with its default value; config files and CLI flags
// overlay these.
Config experiment_defaults();

// defaults <- file (optional) <- overrides.
Config load_experiment_config(const std::filesystem::path& path, const Config& overrides);

// The experiment pipeline. Stages are content-addressed by their config
// inputs and upstream stage hashes, so every ensure_* call is idempotent:
// a completed stage is a cache hit, an interrupted one is rebuilt in place.
// Artifacts shared between variants and seeds (demo shards, the flow cache,
// the flow-pretrained world model) resolve to the same stage directory and
// are built once.
//
// Evaluation variants:
//   bc           policy alone (the first sampled plan, open-loop)
//   lps          value-ranked plans; value trained per Algorithm 1 on the
//                flow-pretrained, finetuned world model
//   lps_scratch  as lps but on a world model trained from scratch
//   full|binary|bootstrap  as lps with the named reward variant (ablation)
//   wm_goal      plans ranked by latent cosine to a retrieved goal image
//   iql          plans ranked by Q(s, first action)
class Experiment {
 public:
  explicit Experiment(Config cfg);

  const Config& config() const { return cfg_; }
  Store& store() { return store_; }
  std::filesystem::path out_dir() const { return cfg_.str("out"); }

  std::filesystem::path ensure_target_demos();
  std::filesystem::path ensure_pool_demos();
  std::filesystem::path ensure_pool_flow();
  std::filesystem::path ensure_pretrained_wm();
  std::filesystem::path ensure_finetuned_wm(uint64_t seed);
  std::filesystem::path ensure_scratch_wm(uint64_t seed);
  std::filesystem::path ensure_bc(int64_t horizon, uint64_t seed);
  std::filesystem::path ensure_value(int64_t horizon, const std::string& reward_variant,
                                     bool scratch_wm, uint64_t seed);
  std::filesystem::path ensure_iql(uint64_t seed);

  // One (variant, seed) evaluation row, cache-keyed like any stage. The
  // horizon lands in the row only when record_horizon is set (sweeps).
  ResultRow ensure_eval(const std::string& variant, int64_t horizon, uint64_t seed,
                        bool record_horizon = false);

  // Full pipeline over eval.variants x eval.seeds; writes results.jsonl,
  // report.txt, plots, and curve copies under the output directory.
  std::vector<ResultRow> run();

  // mode "horizon": retrains BC+LPS per swept h; mode "reward": retrains the
  // value function per reward variant on the shared world model. Writes into
  // <out>/ablate_<mode>/.
  std::vector<ResultRow> ablate(const std::string& mode);

 private:
  uint64_t demos_target_hash() const;
  uint64_t demos_pool_hash() const;
  uint64_t flow_hash() const;
  uint64_t pretrain_hash() const;
  uint64_t finetune_hash(uint64_t seed) const;
  uint64_t scratch_hash(uint64_t seed) const;
  uint64_t bc_hash(int64_t horizon, uint64_t seed) const;
  uint64_t value_hash(int64_t horizon, const std::string& reward_variant, bool scratch_wm,
                      uint64_t seed) const;
  uint64_t iql_hash(uint64_t seed) const;
  uint64_t eval_hash(const std::string& variant, int64_t horizon, uint64_t seed) const;

  std::vector<uint64_t> eval_seeds() const;
  void write_outputs(const std::filesystem::path& out, const std::vector<ResultRow>& rows);

  Config cfg_;
  Store store_;
  std::vector<std::pair<std::string, double>> timings_;
};

}  // namespace lps::harness
