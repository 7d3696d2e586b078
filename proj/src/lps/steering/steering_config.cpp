#include "lps/steering/steering_config.hpp"

#include "lps/core/check.hpp"

namespace lps::steering {

std::string to_string(FrozenMode mode) {
  switch (mode) {
    case FrozenMode::kStopgrad:
      return "stopgrad";
    case FrozenMode::kSnapshot:
      return "snapshot";
  }
  LPS_FAIL("unknown FrozenMode");
}

std::string to_string(RewardVariant variant) {
  switch (variant) {
    case RewardVariant::kFull:
      return "full";
    case RewardVariant::kBinary:
      return "binary";
    case RewardVariant::kBootstrap:
      return "bootstrap";
  }
  LPS_FAIL("unknown RewardVariant");
}

RewardVariant reward_variant_from_string(const std::string& name) {
  if (name == "full") return RewardVariant::kFull;
  if (name == "binary") return RewardVariant::kBinary;
  if (name == "bootstrap") return RewardVariant::kBootstrap;
  LPS_FAIL("unknown reward variant '" << name << "' (expected full|binary|bootstrap)");
}

void SteeringOptions::validate() const {
  LPS_CHECK(horizon >= 1, "SteeringOptions: horizon must be >= 1, got " << horizon);
  LPS_CHECK(gamma > 0.0 && gamma <= 1.0, "SteeringOptions: gamma out of (0,1]: " << gamma);
  LPS_CHECK(lambda >= 0.0 && lambda <= 1.0, "SteeringOptions: lambda out of [0,1]: " << lambda);
  LPS_CHECK(gamma_s > 0.0 && gamma_s <= 1.0, "SteeringOptions: gamma_s out of (0,1]: " << gamma_s);
  LPS_CHECK(n_plans >= 1, "SteeringOptions: n_plans must be >= 1, got " << n_plans);
  LPS_CHECK(snapshot_every >= 1, "SteeringOptions: snapshot_every must be >= 1");
}

SteeringOptions steering_options_from_config(const Config& cfg) {
  SteeringOptions opt;
  opt.horizon = cfg.integer("horizon", opt.horizon);
  opt.gamma = cfg.real("gamma", opt.gamma);
  opt.lambda = cfg.real("lambda", opt.lambda);
  opt.gamma_s = cfg.real("gamma_s", opt.gamma_s);
  opt.n_plans = cfg.integer("n_plans", opt.n_plans);
  opt.variant = reward_variant_from_string(cfg.str("variant", "full"));
  opt.finetune_wm = cfg.boolean("finetune_wm", opt.finetune_wm);

  const std::string frozen = cfg.str("frozen_mode", "stopgrad");
  if (frozen == "stopgrad") {
    opt.frozen_mode = FrozenMode::kStopgrad;
  } else if (frozen == "snapshot") {
    opt.frozen_mode = FrozenMode::kSnapshot;
  } else if (frozen.rfind("snapshot(", 0) == 0 && frozen.back() == ')') {
    opt.frozen_mode = FrozenMode::kSnapshot;
    const std::string inner = frozen.substr(9, frozen.size() - 10);
    try {
      opt.snapshot_every = std::stoll(inner);
    } catch (const std::exception&) {
      LPS_FAIL("bad frozen_mode step count '" << inner << "' in '" << frozen << "'");
    }
  } else {
    LPS_FAIL("unknown frozen_mode '" << frozen
                                     << "' (expected stopgrad|snapshot|snapshot(<steps>))");
  }
  opt.validate();
  return opt;
}

Config steering_options_to_config(const SteeringOptions& opt) {
  Config cfg;
  cfg.set("horizon", opt.horizon);
  cfg.set("gamma", opt.gamma);
  cfg.set("lambda", opt.lambda);
  cfg.set("gamma_s", opt.gamma_s);
  cfg.set("n_plans", opt.n_plans);
  cfg.set("variant", to_string(opt.variant));
  cfg.set("finetune_wm", opt.finetune_wm);
  if (opt.frozen_mode == FrozenMode::kStopgrad) {
    cfg.set("frozen_mode", std::string("stopgrad"));
  } else {
    cfg.set("frozen_mode", "snapshot(" + std::to_string(opt.snapshot_every) + ")");
  }
  return cfg;
}

}  // namespace lps::steering
