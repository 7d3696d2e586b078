#include "lps/harness/evaluate.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "lps/core/check.hpp"
#include "lps/core/hash.hpp"

namespace lps::harness {

namespace {

torch::Tensor select_plan_for(EvalModels& models, const EvalSpec& spec, torch::Tensor obs,
                              uint64_t decision_seed) {
  if (spec.method == "bc") {
    return models.policy->sample_plans(obs, 1, decision_seed).squeeze(0);
  }
  if (spec.method == "lps") {
    return steering::select_plan(models.policy, models.wm, models.vf, obs, spec.steering,
                                 decision_seed)
        .plan;
  }
  if (spec.method == "wm_goal") {
    return steering::select_plan_by_goal(models.policy, models.wm, models.goals, obs,
                                         spec.steering, decision_seed)
        .plan;
  }
  if (spec.method == "iql") {
    return steering::select_plan_by_q(models.policy, models.iql, obs, spec.steering.n_plans,
                                      decision_seed)
        .plan;
  }
  LPS_FAIL("unknown evaluation method '" << spec.method << "'");
}

void set_eval_mode(EvalModels& models) {
  if (!models.policy.is_empty()) models.policy->eval();
  if (!models.wm.is_empty()) models.wm->eval();
  if (!models.vf.is_empty()) models.vf->eval();
  if (!models.iql.is_empty()) models.iql->eval();
}

}  // namespace

bool run_episode(EvalModels& models, const EvalSpec& spec, uint64_t episode_seed) {
  LPS_CHECK(!models.policy.is_empty(), "run_episode: policy is required");
  torch::NoGradGuard no_grad;
  envs::PointmassEnv env(envs::for_task(spec.embodiment, spec.task), spec.task, episode_seed,
                         spec.region);
  Image frame = env.reset();
  bool success = false;
  uint64_t decision = 0;
  const int64_t horizon = spec.steering.horizon;
  while (!env.done()) {
    auto obs = wm::obs_to_tensor(frame);
    auto plan = select_plan_for(models, spec, obs, derive_seed(episode_seed, "plan", decision));
    ++decision;
    for (int64_t k = 0; k < horizon && !env.done(); ++k) {
      const envs::Vec2 action{plan[k][0].item<double>(), plan[k][1].item<double>()};
      auto result = env.step(action);
      frame = std::move(result.obs);
      success = success || result.success;
    }
  }
  return success;
}

ResultRow evaluate_seed(EvalModels& models, const EvalSpec& spec, uint64_t seed) {
  LPS_CHECK(spec.n_episodes >= 1, "evaluate_seed: n_episodes must be >= 1");
  LPS_CHECK(spec.workers >= 1, "evaluate_seed: workers must be >= 1");
  set_eval_mode(models);

  std::vector<uint8_t> outcomes(spec.n_episodes, 0);
  std::atomic<int64_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto worker = [&]() {
    torch::NoGradGuard no_grad;
    while (true) {
      const int64_t i = next.fetch_add(1);
      if (i >= spec.n_episodes) return;
      try {
        const uint64_t ep_seed = derive_seed(seed, "episode", static_cast<uint64_t>(i));
        outcomes[i] = run_episode(models, spec, ep_seed) ? 1 : 0;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };

  if (spec.workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(spec.workers);
    for (int w = 0; w < spec.workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);

  ResultRow row;
  row.seed = seed;
  row.episodes = spec.n_episodes;
  for (uint8_t ok : outcomes) row.successes += ok;
  return row;
}

}  // namespace lps::harness
