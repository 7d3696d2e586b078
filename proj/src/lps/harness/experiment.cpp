#include "lps/harness/experiment.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <chrono>
#include <cstdio>

#include "lps/core/check.hpp"
#include "lps/core/fs_util.hpp"
#include "lps/core/hash.hpp"
#include "lps/core/rng.hpp"
#include "lps/envs/demo_gen.hpp"
#include "lps/envs/embodiment.hpp"
#include "lps/envs/shard.hpp"
#include "lps/flow/flow_cache.hpp"
#include "lps/harness/datasets.hpp"
#include "lps/harness/evaluate.hpp"
#include "lps/policy/bc_policy.hpp"
#include "lps/steering/iql.hpp"
#include "lps/steering/lps_trainer.hpp"
#include "lps/steering/value_function.hpp"
#include "lps/wm/world_model.hpp"

namespace lps::harness {

Config experiment_defaults() {
  Config cfg;
  cfg.set("task", std::string("push"));
  cfg.set("target_embodiment", std::string("heldout"));
  cfg.set("pool_embodiments", std::string("identity, gain2x, rot90, barbot"));
  cfg.set("n_demos", int64_t{30});
  cfg.set("pool_per_embodiment", int64_t{100});
  cfg.set("seed", int64_t{1});
  cfg.set("image_codec", std::string("png"));
  cfg.set("demo.spawn_fraction", 0.8);

  cfg.set("flow.estimator", std::string("lk_pyramid"));

  cfg.set("pretrain.steps", int64_t{3000});
  cfg.set("pretrain.batch", int64_t{8});
  cfg.set("pretrain.seq_len", int64_t{8});
  cfg.set("pretrain.lr", 3e-4);

  cfg.set("finetune.steps", int64_t{2000});
  cfg.set("finetune.batch", int64_t{8});
  cfg.set("finetune.seq_len", int64_t{8});
  cfg.set("finetune.lr", 3e-4);
  cfg.set("finetune.val_every", int64_t{50});
  cfg.set("finetune.val_batch", int64_t{8});
  cfg.set("finetune.n_val", int64_t{3});

  cfg.set("bc.steps", int64_t{2000});
  cfg.set("bc.batch", int64_t{16});
  cfg.set("bc.lr", 3e-4);

  cfg.set("lps.horizon", int64_t{16});
  cfg.set("lps.gamma", 0.99);
  cfg.set("lps.lambda", 0.95);
  cfg.set("lps.gamma_s", 0.9);
  cfg.set("lps.n_plans", int64_t{64});
  cfg.set("lps.variant", std::string("full"));
  cfg.set("lps.frozen_mode", std::string("stopgrad"));
  cfg.set("lps.finetune_wm", false);
  cfg.set("lps.steps", int64_t{1500});
  cfg.set("lps.batch", int64_t{8});
  cfg.set("lps.lr", 1e-3);
  cfg.set("lps.wm_lr", 3e-4);

  cfg.set("value.hidden", int64_t{256});
  cfg.set("value.symlog_targets", true);

  cfg.set("iql.steps", int64_t{1500});
  cfg.set("iql.batch", int64_t{32});
  cfg.set("iql.lr", 3e-4);
  cfg.set("iql.gamma", 0.99);
  cfg.set("iql.tau", 0.7);
  cfg.set("iql.polyak", 0.99);

  cfg.set("eval.n_episodes", int64_t{100});
  cfg.set("eval.seeds", std::string("1, 2, 3"));
  cfg.set("eval.variants", std::string("bc, lps"));
  cfg.set("eval.workers", int64_t{1});

  cfg.set("ablate.horizons", std::string("2, 4, 8, 12, 16, 20, 24"));
  return cfg;
}

Config load_experiment_config(const std::filesystem::path& path, const Config& overrides) {
  Config cfg = experiment_defaults();
  if (!path.empty()) cfg.merge_from(Config::from_file(path));
  cfg.merge_from(overrides);
  return cfg;
}

namespace {

void put_prefixed(Config& dst, const Config& src, const std::string& prefix) {
  const std::string dotted = prefix + ".";
  for (const auto& [key, value] : src.items()) {
    if (key.rfind(dotted, 0) == 0) dst.set(key, value);
  }
}

wm::WorldModelOptions resolve_wm_options(const Config& cfg, const std::string& source,
                                         int64_t action_dim, int64_t obs_hw) {
  auto opts = wm::wm_options_from_config(cfg.section("wm"));
  opts.action_source = source;
  opts.action_dim = action_dim;
  opts.obs_hw = obs_hw;
  opts.finalize();
  opts.validate();
  return opts;
}

void write_curve(const std::filesystem::path& path,
                 const std::vector<std::pair<int64_t, double>>& curve) {
  std::string text;
  char buf[64];
  for (const auto& [step, value] : curve) {
    std::snprintf(buf, sizeof(buf), "%lld %.6f\n", static_cast<long long>(step), value);
    text += buf;
  }
  atomic_write_text(path, text);
}

// Trains in place; returns the (step, validation recon loss) curve when a
// validation set is given.
std::vector<std::pair<int64_t, double>> train_wm_loop(wm::WorldModel& model,
                                                      const EpisodeDataset& train,
                                                      const EpisodeDataset* val,
                                                      const Config& tcfg, uint64_t seed,
                                                      bool with_flow) {
  torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(tcfg.real("lr")));
  Rng rng(derive_seed(seed, "batches"));
  const int64_t steps = tcfg.integer("steps");
  const int64_t batch = tcfg.integer("batch");
  const int64_t seq_len = tcfg.integer("seq_len");
  const int64_t val_every = tcfg.integer("val_every", 0);
  const int64_t val_batch = tcfg.integer("val_batch", 8);
  std::vector<std::pair<int64_t, double>> curve;
  auto record = [&](int64_t step) {
    if (val == nullptr || val_every <= 0) return;
    auto scalars = wm::wm_eval_loss(model, val->validation_batch(val_batch, seq_len));
    curve.emplace_back(step, scalars.at("recon"));
  };
  record(0);
  for (int64_t step = 1; step <= steps; ++step) {
    auto batch_data = train.sample_sequences(batch, seq_len, rng, with_flow);
    wm::wm_train_step(model, opt, batch_data);
    if (val != nullptr && val_every > 0 && (step % val_every == 0 || step == steps)) {
      record(step);
    }
  }
  return curve;
}

void train_bc_loop(policy::BcPolicy& policy, const EpisodeDataset& ds, const Config& tcfg,
                   int64_t horizon, uint64_t seed) {
  torch::optim::Adam opt(policy->parameters(), torch::optim::AdamOptions(tcfg.real("lr")));
  Rng rng(derive_seed(seed, "batches"));
  auto gen = at::make_generator<at::CPUGeneratorImpl>(derive_seed(seed, "noise"));
  const int64_t steps = tcfg.integer("steps");
  const int64_t batch = tcfg.integer("batch");
  for (int64_t step = 1; step <= steps; ++step) {
    auto b = ds.sample_chunks(batch, horizon, rng);
    policy::train_bc_step(policy, opt, b.obs, b.chunks, gen);
  }
}

std::string method_for(const std::string& variant) {
  if (variant == "bc") return "bc";
  if (variant == "lps" || variant == "lps_scratch" || variant == "full" ||
      variant == "binary" || variant == "bootstrap") {
    return "lps";
  }
  if (variant == "wm_goal") return "wm_goal";
  if (variant == "iql") return "iql";
  LPS_FAIL("unknown evaluation variant '" << variant << "'");
}

struct StageTimer {
  std::vector<std::pair<std::string, double>>& timings;
  std::string name;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  ~StageTimer() {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    timings.emplace_back(name, secs);
  }
};

void check_lineage(const std::map<std::string, std::string>& manifest, const std::string& key,
                   const std::string& expected, const std::string& what) {
  auto it = manifest.find(key);
  LPS_CHECK(it != manifest.end() && it->second == expected,
            "checkpoint/config hash mismatch: "
                << what << " expects " << key << "=" << expected << " but checkpoint has "
                << (it == manifest.end() ? std::string("<missing>") : it->second));
}

}  // namespace

Experiment::Experiment(Config cfg) : cfg_(std::move(cfg)), store_(resolve_cache_root(cfg_)) {
  LPS_CHECK(cfg_.has("out"), "experiment config: 'out' directory is required");
  LPS_CHECK(cfg_.integer("n_demos") >= 1, "experiment config: n_demos must be >= 1");
  LPS_CHECK(cfg_.integer("eval.n_episodes") >= 1,
            "experiment config: eval.n_episodes must be >= 1");
  const std::string task = cfg_.str("task");
  LPS_CHECK(task == "reach" || task == "push", "experiment config: unknown task '" << task << "'");
  envs::stock_embodiment(cfg_.str("target_embodiment"));  // errors on unknown ids
  LPS_CHECK(!eval_seeds().empty(), "experiment config: eval.seeds must be nonempty");
  for (const auto& variant : cfg_.str_list("eval.variants")) method_for(variant);
}

std::vector<uint64_t> Experiment::eval_seeds() const {
  std::vector<uint64_t> seeds;
  for (int64_t s : cfg_.int_list("eval.seeds")) {
    LPS_CHECK(s >= 0, "eval.seeds entries must be non-negative");
    seeds.push_back(static_cast<uint64_t>(s));
  }
  return seeds;
}

// ---------------------------------------------------------------------------
// Stage input hashes. Each hash covers exactly the config keys the stage
// reads plus the hashes of its upstream stages, so unrelated config edits
// never invalidate a cache and related ones always do.

uint64_t Experiment::demos_target_hash() const {
  Config in;
  in.set("stage", std::string("demos_target"));
  in.set("task", cfg_.str("task"));
  in.set("embodiment", cfg_.str("target_embodiment"));
  in.set("n", cfg_.integer("n_demos"));
  in.set("spawn_fraction", cfg_.real("demo.spawn_fraction"));
  in.set("codec", cfg_.str("image_codec"));
  in.set("seed", cfg_.integer("seed"));
  return in.hash();
}

uint64_t Experiment::demos_pool_hash() const {
  Config in;
  in.set("stage", std::string("demos_pool"));
  in.set("task", cfg_.str("task"));
  in.set("embodiments", cfg_.str("pool_embodiments"));
  in.set("per_embodiment", cfg_.integer("pool_per_embodiment"));
  in.set("spawn_fraction", cfg_.real("demo.spawn_fraction"));
  in.set("codec", cfg_.str("image_codec"));
  in.set("seed", cfg_.integer("seed"));
  return in.hash();
}

uint64_t Experiment::flow_hash() const {
  Config in;
  in.set("stage", std::string("flow"));
  in.set("demos", hex64(demos_pool_hash()));
  in.set("estimator", cfg_.str("flow.estimator"));
  return in.hash();
}

uint64_t Experiment::pretrain_hash() const {
  Config in;
  in.set("stage", std::string("pretrain"));
  in.set("demos", hex64(demos_pool_hash()));
  in.set("flow", hex64(flow_hash()));
  put_prefixed(in, cfg_, "wm");
  put_prefixed(in, cfg_, "pretrain");
  in.set("seed", cfg_.integer("seed"));
  return in.hash();
}

uint64_t Experiment::finetune_hash(uint64_t seed) const {
  Config in;
  in.set("stage", std::string("finetune"));
  in.set("pretrained", hex64(pretrain_hash()));
  in.set("demos", hex64(demos_target_hash()));
  put_prefixed(in, cfg_, "finetune");
  in.set("seed", static_cast<int64_t>(seed));
  return in.hash();
}

uint64_t Experiment::scratch_hash(uint64_t seed) const {
  Config in;
  in.set("stage", std::string("scratch"));
  in.set("demos", hex64(demos_target_hash()));
  put_prefixed(in, cfg_, "wm");
  put_prefixed(in, cfg_, "finetune");  // scratch inherits the finetune recipe
  put_prefixed(in, cfg_, "scratch");
  in.set("seed", static_cast<int64_t>(seed));
  return in.hash();
}

uint64_t Experiment::bc_hash(int64_t horizon, uint64_t seed) const {
  Config in;
  in.set("stage", std::string("bc"));
  in.set("demos", hex64(demos_target_hash()));
  put_prefixed(in, cfg_, "policy");
  put_prefixed(in, cfg_, "bc");
  in.set("horizon", horizon);
  in.set("seed", static_cast<int64_t>(seed));
  return in.hash();
}

uint64_t Experiment::value_hash(int64_t horizon, const std::string& reward_variant,
                                bool scratch_wm, uint64_t seed) const {
  Config in;
  in.set("stage", std::string("value"));
  in.set("wm", hex64(scratch_wm ? scratch_hash(seed) : finetune_hash(seed)));
  in.set("bc", hex64(bc_hash(horizon, seed)));
  put_prefixed(in, cfg_, "lps");
  put_prefixed(in, cfg_, "value");
  in.set("lps.horizon", horizon);
  in.set("lps.variant", reward_variant);
  in.set("seed", static_cast<int64_t>(seed));
  return in.hash();
}

uint64_t Experiment::iql_hash(uint64_t seed) const {
  Config in;
  in.set("stage", std::string("iql"));
  in.set("demos", hex64(demos_target_hash()));
  put_prefixed(in, cfg_, "iql");
  in.set("seed", static_cast<int64_t>(seed));
  return in.hash();
}

uint64_t Experiment::eval_hash(const std::string& variant, int64_t horizon,
                               uint64_t seed) const {
  const std::string method = method_for(variant);
  Config in;
  in.set("stage", std::string("eval"));
  in.set("variant", variant);
  in.set("method", method);
  in.set("task", cfg_.str("task"));
  in.set("embodiment", cfg_.str("target_embodiment"));
  in.set("n_episodes", cfg_.integer("eval.n_episodes"));
  in.set("horizon", horizon);
  in.set("n_plans", cfg_.integer("lps.n_plans"));
  in.set("gamma_s", cfg_.real("lps.gamma_s"));
  in.set("bc", hex64(bc_hash(horizon, seed)));
  if (method == "lps") {
    const bool scratch = variant == "lps_scratch";
    const std::string reward =
        variant == "lps" || variant == "lps_scratch" ? cfg_.str("lps.variant") : variant;
    in.set("value", hex64(value_hash(horizon, reward, scratch, seed)));
  } else if (method == "wm_goal") {
    in.set("wm", hex64(finetune_hash(seed)));
    in.set("demos", hex64(demos_target_hash()));
  } else if (method == "iql") {
    in.set("iql", hex64(iql_hash(seed)));
  }
  in.set("seed", static_cast<int64_t>(seed));
  return in.hash();
}

// ---------------------------------------------------------------------------
// Stages.

std::filesystem::path Experiment::ensure_target_demos() {
  const uint64_t hash = demos_target_hash();
  auto dir = store_.stage_dir("demos_target", hash);
  if (store_.stage_done(dir)) return dir;
  StageTimer timer{timings_, "demos_target"};
  try {
    envs::generate_demos(envs::stock_embodiment(cfg_.str("target_embodiment")), cfg_.str("task"),
                         static_cast<int>(cfg_.integer("n_demos")),
                         derive_seed(cfg_.integer("seed"), "demos_target"), dir / "shard",
                         envs::SpawnRegion::central(cfg_.real("demo.spawn_fraction")),
                         cfg_.str("image_codec"));
    Config info;
    info.set("stage", std::string("demos_target"));
    info.set("n", cfg_.integer("n_demos"));
    store_.mark_stage_done(dir, info);
    return dir;
  } catch (const std::exception& e) {
    LPS_FAIL("stage 'demos_target' failed: " << e.what());
  }
}

std::filesystem::path Experiment::ensure_pool_demos() {
  const uint64_t hash = demos_pool_hash();
  auto dir = store_.stage_dir("demos_pool", hash);
  if (store_.stage_done(dir)) return dir;
  StageTimer timer{timings_, "demos_pool"};
  try {
    std::vector<envs::EmbodimentConfig> pool;
    for (const auto& id : cfg_.str_list("pool_embodiments")) {
      pool.push_back(envs::stock_embodiment(id));
    }
    envs::validate_pool(pool);
    const auto region = envs::SpawnRegion::central(cfg_.real("demo.spawn_fraction"));
    std::vector<envs::Episode> episodes;
    for (const auto& cfg : pool) {
      auto eps = envs::collect_demos(
          cfg, cfg_.str("task"), static_cast<int>(cfg_.integer("pool_per_embodiment")),
          derive_seed(cfg_.integer("seed"), "demos_pool_" + cfg.embodiment_id), region);
      episodes.insert(episodes.end(), std::make_move_iterator(eps.begin()),
                      std::make_move_iterator(eps.end()));
    }
    Config extra;
    extra.set("task", cfg_.str("task"));
    extra.set("kind", std::string("pretrain_pool"));
    envs::write_shard(dir / "shard", episodes, extra, cfg_.str("image_codec"));
    Config info;
    info.set("stage", std::string("demos_pool"));
    info.set("episodes", static_cast<int64_t>(episodes.size()));
    store_.mark_stage_done(dir, info);
    return dir;
  } catch (const std::exception& e) {
    LPS_FAIL("stage 'demos_pool' failed: " << e.what());
  }
}

std::filesystem::path Experiment::ensure_pool_flow() {
  auto pool_dir = ensure_pool_demos();
  const uint64_t hash = flow_hash();
  auto dir = store_.stage_dir("flow", hash);
  if (store_.stage_done(dir)) return dir;
  StageTimer timer{timings_, "flow"};
  try {
    auto report = flow::precompute_flow_shard(pool_dir / "shard", cfg_.str("flow.estimator"),
                                              dir / "flow");
    LPS_CHECK(report.skipped.empty(),
              "flow stage: " << report.skipped.size() << " corrupt episodes in a fresh shard");
    Config info;
    info.set("stage", std::string("flow"));
    info.set("episodes", static_cast<int64_t>(report.episodes));
    store_.mark_stage_done(dir, info);
    return dir;
  } catch (const std::exception& e) {
    LPS_FAIL("stage 'flow' failed: " << e.what());
  }
}

std::filesystem::path Experiment::ensure_pretrained_wm() {
  auto pool_dir = ensure_pool_demos();
  auto flow_dir = ensure_pool_flow();
  const uint64_t hash = pretrain_hash();
  auto dir = store_.stage_dir("pretrain", hash);
  if (store_.stage_done(dir)) return dir;
  StageTimer timer{timings_, "pretrain"};
  try {
    const uint64_t seed = derive_seed(cfg_.integer("seed"), "pretrain");
    torch::manual_seed(seed);
    auto ds = EpisodeDataset::load(pool_dir / "shard", flow_dir / "flow");
    auto opts = resolve_wm_options(cfg_, "flow", ds.action_dim(), ds.frame_hw());
    wm::WorldModel model(opts);
    train_wm_loop(model, ds, nullptr, cfg_.section("pretrain"), seed, /*with_flow=*/true);
    wm::save_world_model(model, dir / "wm.ckpt", {{"stage", hex64(hash)}});
    Config info;
    info.set("stage", std::string("pretrain"));
    store_.mark_stage_done(dir, info);
    return dir;
  } catch (const std::exception& e) {
    LPS_FAIL("stage 'pretrain' failed: " << e.what());
  }
}

std::filesystem::path Experiment::ensure_finetuned_wm(uint64_t seed) {
  auto pre_dir = ensure_pretrained_wm();
  auto demo_dir = ensure_target_demos();
  const uint64_t hash = finetune_hash(seed);
  auto dir = store_.stage_dir("finetune", hash);
  if (store_.stage_done(dir)) return dir;
  StageTimer timer{timings_, "finetune"};
  try {
    const uint64_t stage_seed = derive_seed(seed, "finetune");
    torch::manual_seed(stage_seed);
    auto pretrained = wm::load_world_model(pre_dir / "wm.ckpt");
    auto ds = EpisodeDataset::load(demo_dir / "shard");
    auto model = wm::finetune_swap(pretrained.model, ds.action_dim());
    auto [train, val] = ds.split_validation(cfg_.integer("finetune.n_val"));
    auto curve = train_wm_loop(model, train, &val, cfg_.section("finetune"), stage_seed,
                               /*with_flow=*/false);
    write_curve(dir / "curve.txt", curve);
    wm::save_world_model(model, dir / "wm.ckpt", {{"stage", hex64(hash)}});
    Config info;
    info.set("stage", std::string("finetune"));
    store_.mark_stage_done(dir, info);
    return dir;
  } catch (const std::exception& e) {
    LPS_FAIL("stage 'finetune' failed: " << e.what());
  }
}

std::filesystem::path Experiment::ensure_scratch_wm(uint64_t seed) {
  auto demo_dir = ensure_target_demos();
  const uint64_t hash = scratch_hash(seed);
  auto dir = store_.stage_dir("scratch", hash);
  if (store_.stage_done(dir)) return dir;
  StageTimer timer{timings_, "scratch"};
  try {
    const uint64_t stage_seed = derive_seed(seed, "scratch");
    torch::manual_seed(stage_seed);
    auto ds = EpisodeDataset::load(demo_dir / "shard");
    auto opts = resolve_wm_options(cfg_, "raw", ds.action_dim(), ds.frame_hw());
    wm::WorldModel model(opts);
    Config tcfg = cfg_.section("finetune");
    tcfg.merge_from(cfg_.section("scratch"));
    auto [train, val] = ds.split_validation(tcfg.integer("n_val"));
    auto curve = train_wm_loop(model, train, &val, tcfg, stage_seed, /*with_flow=*/false);
    write_curve(dir / "curve.txt", curve);
    wm::save_world_model(model, dir / "wm.ckpt", {{"stage", hex64(hash)}});
    Config info;
    info.set("stage", std::string("scratch"));
    store_.mark_stage_done(dir, info);
    return dir;
  } catch (const std::exception& e) {
    LPS_FAIL("stage 'scratch' failed: " << e.what());
  }
}

std::filesystem::path Experiment::ensure_bc(int64_t horizon, uint64_t seed) {
  auto demo_dir = ensure_target_demos();
  const uint64_t hash = bc_hash(horizon, seed);
  auto dir = store_.stage_dir("bc", hash);
  if (store_.stage_done(dir)) return dir;
  StageTimer timer{timings_, "bc"};
  try {
    const uint64_t stage_seed = derive_seed(seed, "bc", static_cast<uint64_t>(horizon));
    torch::manual_seed(stage_seed);
    auto ds = EpisodeDataset::load(demo_dir / "shard");
    auto opts = policy::policy_options_from_config(cfg_.section("policy"));
    opts.horizon = horizon;
    opts.action_dim = ds.action_dim();
    opts.obs_hw = ds.frame_hw();
    opts.validate();
    policy::BcPolicy policy(opts);
    train_bc_loop(policy, ds, cfg_.section("bc"), horizon, stage_seed);
    policy::save_policy(policy, dir / "policy.ckpt", {{"stage", hex64(hash)}});
    Config info;
    info.set("stage", std::string("bc"));
    info.set("horizon", horizon);
    store_.mark_stage_done(dir, info);
    return dir;
  } catch (const std::exception& e) {
    LPS_FAIL("stage 'bc' failed: " << e.what());
  }
}

std::filesystem::path Experiment::ensure_value(int64_t horizon, const std::string& reward_variant,
                                               bool scratch_wm, uint64_t seed) {
  auto wm_dir = scratch_wm ? ensure_scratch_wm(seed) : ensure_finetuned_wm(seed);
  auto bc_dir = ensure_bc(horizon, seed);
  auto demo_dir = ensure_target_demos();
  const uint64_t hash = value_hash(horizon, reward_variant, scratch_wm, seed);
  auto dir = store_.stage_dir("value", hash);
  if (store_.stage_done(dir)) return dir;
  StageTimer timer{timings_, "value"};
  try {
    const uint64_t stage_seed = derive_seed(seed, "value");
    torch::manual_seed(stage_seed);
    auto wm_loaded = wm::load_world_model(wm_dir / "wm.ckpt");
    auto policy_loaded = policy::load_policy(bc_dir / "policy.ckpt");
    steering::ValueOptions vopts;
    vopts.feature_dim = wm_loaded.model->options.feature_dim();
    vopts.hidden = cfg_.integer("value.hidden");
    vopts.symlog_targets = cfg_.boolean("value.symlog_targets");
    steering::ValueFunction vf(vopts);

    auto sopts = steering::steering_options_from_config(cfg_.section("lps"));
    sopts.horizon = horizon;
    sopts.variant = steering::reward_variant_from_string(reward_variant);
    sopts.validate();

    steering::LpsTrainer trainer(wm_loaded.model, policy_loaded.model, vf, sopts,
                                 derive_seed(stage_seed, "alg1"), cfg_.real("lps.lr"),
                                 cfg_.real("lps.wm_lr"));
    auto ds = EpisodeDataset::load(demo_dir / "shard");
    Rng rng(derive_seed(stage_seed, "batches"));
    const int64_t steps = cfg_.integer("lps.steps");
    const int64_t batch = cfg_.integer("lps.batch");
    for (int64_t step = 1; step <= steps; ++step) {
      trainer.train_step(ds.sample_slices(batch, horizon, rng));
    }
    const std::map<std::string, std::string> lineage = {
        {"stage", hex64(hash)},
        {"wm_stage", wm_dir.filename().string()},
        {"bc_stage", bc_dir.filename().string()}};
    steering::save_value_function(vf, dir / "vf.ckpt", lineage);
    // The scoring world model (identical to the input unless line-6 finetuning
    // ran) travels with the value function so evaluation sees the same pair.
    wm::save_world_model(trainer.world_model(), dir / "wm.ckpt", lineage);
    Config info;
    info.set("stage", std::string("value"));
    info.set("wm_stage", wm_dir.filename().string());
    info.set("bc_stage", bc_dir.filename().string());
    store_.mark_stage_done(dir, info);
    return dir;
  } catch (const std::exception& e) {
    LPS_FAIL("stage 'value' failed: " << e.what());
  }
}

std::filesystem::path Experiment::ensure_iql(uint64_t seed) {
  auto demo_dir = ensure_target_demos();
  const uint64_t hash = iql_hash(seed);
  auto dir = store_.stage_dir("iql", hash);
  if (store_.stage_done(dir)) return dir;
  StageTimer timer{timings_, "iql"};
  try {
    const uint64_t stage_seed = derive_seed(seed, "iql");
    torch::manual_seed(stage_seed);
    auto ds = EpisodeDataset::load(demo_dir / "shard");
    auto opts = steering::iql_options_from_config(cfg_.section("iql"));
    opts.image_input = true;
    opts.action_dim = ds.action_dim();
    opts.obs_hw = ds.frame_hw();
    opts.validate();
    steering::Iql iql(opts);
    torch::optim::Adam opt(iql->live_parameters(),
                           torch::optim::AdamOptions(cfg_.real("iql.lr")));
    Rng rng(derive_seed(stage_seed, "batches"));
    const int64_t steps = cfg_.integer("iql.steps");
    const int64_t batch = cfg_.integer("iql.batch");
    for (int64_t step = 1; step <= steps; ++step) {
      auto b = ds.sample_transitions(batch, rng);
      steering::IqlBatch ib{b.obs, b.actions, b.rewards, b.next_obs, b.done};
      iql->train_step(opt, ib);
    }
    steering::save_iql(iql, dir / "iql.ckpt", {{"stage", hex64(hash)}});
    Config info;
    info.set("stage", std::string("iql"));
    store_.mark_stage_done(dir, info);
    return dir;
  } catch (const std::exception& e) {
    LPS_FAIL("stage 'iql' failed: " << e.what());
  }
}

ResultRow Experiment::ensure_eval(const std::string& variant, int64_t horizon, uint64_t seed,
                                  bool record_horizon) {
  const std::string method = method_for(variant);
  const uint64_t hash = eval_hash(variant, horizon, seed);
  auto dir = store_.stage_dir("eval", hash);

  ResultRow row;
  row.config_hash = hex64(hash);
  row.variant = variant;
  row.seed = seed;
  row.horizon = record_horizon ? horizon : 0;

  if (store_.stage_done(dir)) {
    auto info = store_.stage_info(dir);
    row.successes = info.integer("successes");
    row.episodes = info.integer("episodes");
    return row;
  }
  StageTimer timer{timings_, "eval:" + variant};
  try {
    EvalModels models;
    auto bc_dir = ensure_bc(horizon, seed);
    models.policy = policy::load_policy(bc_dir / "policy.ckpt").model;
    if (method == "lps") {
      const bool scratch = variant == "lps_scratch";
      const std::string reward =
          variant == "lps" || variant == "lps_scratch" ? cfg_.str("lps.variant") : variant;
      auto value_dir = ensure_value(horizon, reward, scratch, seed);
      auto wm_src = scratch ? ensure_scratch_wm(seed) : ensure_finetuned_wm(seed);
      auto vf_loaded = steering::load_value_function(value_dir / "vf.ckpt");
      check_lineage(vf_loaded.manifest, "wm_stage", wm_src.filename().string(),
                    "evaluation of '" + variant + "'");
      check_lineage(vf_loaded.manifest, "bc_stage", bc_dir.filename().string(),
                    "evaluation of '" + variant + "'");
      models.vf = vf_loaded.model;
      models.wm = wm::load_world_model(value_dir / "wm.ckpt").model;
    } else if (method == "wm_goal") {
      auto wm_dir = ensure_finetuned_wm(seed);
      models.wm = wm::load_world_model(wm_dir / "wm.ckpt").model;
      auto demos = envs::read_shard(ensure_target_demos() / "shard");
      models.goals = steering::build_goal_library(models.wm, demos.episodes);
    } else if (method == "iql") {
      models.iql = steering::load_iql(ensure_iql(seed) / "iql.ckpt").model;
    }

    EvalSpec spec;
    spec.task = cfg_.str("task");
    spec.embodiment = envs::stock_embodiment(cfg_.str("target_embodiment"));
    spec.region = envs::SpawnRegion::full();
    spec.steering = steering::steering_options_from_config(cfg_.section("lps"));
    spec.steering.horizon = horizon;
    spec.steering.validate();
    spec.method = method;
    spec.n_episodes = cfg_.integer("eval.n_episodes");
    spec.workers = static_cast<int>(cfg_.integer("eval.workers"));

    auto outcome = evaluate_seed(models, spec, seed);
    row.successes = outcome.successes;
    row.episodes = outcome.episodes;

    Config info;
    info.set("stage", std::string("eval"));
    info.set("variant", variant);
    info.set("seed", static_cast<int64_t>(seed));
    info.set("successes", row.successes);
    info.set("episodes", row.episodes);
    store_.mark_stage_done(dir, info);
    return row;
  } catch (const std::exception& e) {
    LPS_FAIL("stage 'eval:" << variant << "' failed: " << e.what());
  }
}

void Experiment::write_outputs(const std::filesystem::path& out,
                               const std::vector<ResultRow>& rows) {
  std::filesystem::create_directories(out);
  cfg_.save(out / "config.txt");
  write_results(out / "results.jsonl", rows);

  // Copy whatever training curves exist for the seeds in play.
  const auto curve_dir = out / "curves";
  auto copy_curve = [&](const std::filesystem::path& stage_dir, const std::string& name) {
    const auto src = stage_dir / "curve.txt";
    if (!std::filesystem::exists(src)) return;
    std::filesystem::create_directories(curve_dir);
    auto bytes = read_bytes(src);
    atomic_write_text(curve_dir / name, std::string(bytes.begin(), bytes.end()));
  };
  for (uint64_t seed : eval_seeds()) {
    auto fin = store_.stage_dir("finetune", finetune_hash(seed));
    if (store_.stage_done(fin)) copy_curve(fin, "finetune_seed" + std::to_string(seed) + ".txt");
    auto scr = store_.stage_dir("scratch", scratch_hash(seed));
    if (store_.stage_done(scr)) copy_curve(scr, "scratch_seed" + std::to_string(seed) + ".txt");
  }
  make_report(out);

  std::string timing_text;
  for (const auto& [name, secs] : timings_) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s %.1f\n", name.c_str(), secs);
    timing_text += buf;
  }
  atomic_write_text(out / "timings.txt", timing_text);
}

std::vector<ResultRow> Experiment::run() {
  const int64_t horizon = cfg_.integer("lps.horizon");
  std::vector<ResultRow> rows;
  for (const auto& variant : cfg_.str_list("eval.variants")) {
    for (uint64_t seed : eval_seeds()) {
      rows.push_back(ensure_eval(variant, horizon, seed));
    }
  }
  write_outputs(out_dir(), rows);
  return rows;
}

std::vector<ResultRow> Experiment::ablate(const std::string& mode) {
  LPS_CHECK(mode == "horizon" || mode == "reward",
            "ablate: mode must be 'horizon' or 'reward', got '" << mode << "'");
  Config sub = cfg_;
  sub.set("out", (out_dir() / ("ablate_" + mode)).string());
  sub.set("cache_dir", store_.root().string());
  if (cfg_.has("ablate.n_episodes")) sub.set("eval.n_episodes", cfg_.integer("ablate.n_episodes"));
  if (cfg_.has("ablate.seeds")) sub.set("eval.seeds", cfg_.str("ablate.seeds"));
  Experiment exp(sub);

  std::vector<ResultRow> rows;
  if (mode == "horizon") {
    for (int64_t h : cfg_.int_list("ablate.horizons")) {
      for (uint64_t seed : exp.eval_seeds()) {
        rows.push_back(exp.ensure_eval("bc", h, seed, /*record_horizon=*/true));
        rows.push_back(exp.ensure_eval("lps", h, seed, /*record_horizon=*/true));
      }
    }
  } else {
    const int64_t horizon = cfg_.integer("lps.horizon");
    for (const std::string label : {"full", "binary", "bootstrap"}) {
      for (uint64_t seed : exp.eval_seeds()) {
        rows.push_back(exp.ensure_eval(label, horizon, seed));
      }
    }
  }
  exp.write_outputs(exp.out_dir(), rows);
  return rows;
}

}  // namespace lps::harness
