// latent_steer: demo generation, flow-pretrained world-model training,
// latent policy steering, baselines, evaluation, and reporting — each stage
// cached and resumable. `latent_steer run --config cfg.txt` is the whole
// pipeline; the other subcommands run one stage for inspection or warm-up.

#include <CLI11.hpp>
#include <torch/torch.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "lps/core/check.hpp"
#include "lps/core/config.hpp"
#include "lps/harness/experiment.hpp"
#include "lps/harness/report.hpp"

namespace {

lps::Config build_overrides(const std::string& out, int64_t seed, int workers,
                            const std::vector<std::string>& sets) {
  lps::Config overrides;
  if (!out.empty()) overrides.set("out", out);
  if (seed >= 0) overrides.set("seed", seed);
  if (workers >= 0) overrides.set("eval.workers", static_cast<int64_t>(workers));
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    LPS_CHECK(eq != std::string::npos && eq > 0, "--set expects key=value, got '" << kv << "'");
    overrides.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return overrides;
}

void print_rows(const std::vector<lps::harness::ResultRow>& rows) {
  std::printf("%s", lps::harness::render_table(lps::harness::summarize(rows)).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);

  CLI::App app{"Flow-pretrained world models with latent policy steering"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  int64_t seed = -1;
  int workers = -1;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "Config file (key = value lines)");
  app.add_option("--seed", seed, "Base seed override");
  app.add_option("--out", out, "Output directory override");
  app.add_option("--workers", workers, "Evaluation worker threads");
  app.add_option("--set", sets, "Extra config override key=value (repeatable)");

  auto* gen_demos = app.add_subcommand("gen-demos", "Generate target-embodiment demos");
  auto* flow = app.add_subcommand("precompute-flow", "Demo pool + optic-flow cache");
  auto* pretrain = app.add_subcommand("pretrain-wm", "Flow-conditioned world-model pretraining");
  auto* finetune = app.add_subcommand("finetune-wm", "Raw-action finetune on target demos");
  auto* train_bc = app.add_subcommand("train-bc", "Behavior-cloned diffusion policy");
  auto* train_lps = app.add_subcommand("train-lps", "Steering value function (Algorithm 1)");
  auto* train_iql = app.add_subcommand("train-iql", "IQL baseline critic");
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate configured variants");
  auto* ablate = app.add_subcommand("ablate", "Horizon or reward-variant sweep");
  auto* report = app.add_subcommand("report", "Regenerate report from results.jsonl");
  auto* run = app.add_subcommand("run", "Full pipeline: stages, evaluation, report");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::string ablate_mode = "horizon";
  ablate->add_option("--mode", ablate_mode, "horizon | reward")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const auto overrides = build_overrides(out, seed, workers, sets);
    auto cfg = lps::harness::load_experiment_config(
        config_path.empty() ? std::filesystem::path{} : std::filesystem::path(config_path),
        overrides);

    if (report->parsed()) {
      lps::harness::make_report(cfg.str("out"));
      std::printf("report written to %s\n", cfg.str("out").c_str());
      return 0;
    }

    lps::harness::Experiment exp(std::move(cfg));
    const auto& c = exp.config();
    const int64_t horizon = c.integer("lps.horizon");
    std::vector<uint64_t> seeds;
    for (int64_t s : c.int_list("eval.seeds")) seeds.push_back(static_cast<uint64_t>(s));

    if (gen_demos->parsed()) {
      std::printf("%s\n", exp.ensure_target_demos().c_str());
    } else if (flow->parsed()) {
      std::printf("%s\n", exp.ensure_pool_flow().c_str());
    } else if (pretrain->parsed()) {
      std::printf("%s\n", exp.ensure_pretrained_wm().c_str());
    } else if (finetune->parsed()) {
      for (uint64_t s : seeds) std::printf("%s\n", exp.ensure_finetuned_wm(s).c_str());
    } else if (train_bc->parsed()) {
      for (uint64_t s : seeds) std::printf("%s\n", exp.ensure_bc(horizon, s).c_str());
    } else if (train_lps->parsed()) {
      for (uint64_t s : seeds) {
        std::printf("%s\n",
                    exp.ensure_value(horizon, c.str("lps.variant"), false, s).c_str());
      }
    } else if (train_iql->parsed()) {
      for (uint64_t s : seeds) std::printf("%s\n", exp.ensure_iql(s).c_str());
    } else if (eval_cmd->parsed() || run->parsed()) {
      print_rows(exp.run());
    } else if (ablate->parsed()) {
      print_rows(exp.ablate(ablate_mode));
    }
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
