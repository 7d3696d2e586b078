#include "lps/flow/estimator.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "lps/core/check.hpp"
#include "lps/flow/lk_flow.hpp"

namespace lps::flow {
namespace {

std::mutex g_registry_mutex;

std::map<std::string, FlowEstimatorFn>& registry() {
  static std::map<std::string, FlowEstimatorFn> r = {
      {"lk_pyramid", [](const Image& a, const Image& b) { return lk_pyramid_flow(a, b); }},
  };
  return r;
}

}  // namespace

void check_flow_field(const FlowField& flow) {
  LPS_CHECK(flow.height > 0 && flow.width > 0, "flow field has empty shape");
  const size_t n = static_cast<size_t>(flow.height) * flow.width;
  LPS_CHECK(flow.u.size() == n && flow.v.size() == n, "flow plane sizes do not match shape");
  const float bound = static_cast<float>(flow.width);
  for (size_t i = 0; i < n; ++i) {
    LPS_CHECK(std::isfinite(flow.u[i]) && std::isfinite(flow.v[i]),
              "non-finite flow entry at index " + std::to_string(i));
    LPS_CHECK(std::abs(flow.u[i]) <= bound && std::abs(flow.v[i]) <= bound,
              "flow displacement exceeds frame width at index " + std::to_string(i));
  }
}

void register_flow_estimator(const std::string& name, FlowEstimatorFn fn) {
  LPS_CHECK(!name.empty() && fn, "invalid flow estimator registration");
  std::lock_guard<std::mutex> lock(g_registry_mutex);
  registry()[name] = std::move(fn);
}

std::vector<std::string> flow_estimator_names() {
  std::lock_guard<std::mutex> lock(g_registry_mutex);
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

FlowField compute_flow(const Image& frame_a, const Image& frame_b, const std::string& estimator) {
  LPS_CHECK(frame_a.same_shape(frame_b), "compute_flow: frames must share a shape");
  FlowEstimatorFn fn;
  {
    std::lock_guard<std::mutex> lock(g_registry_mutex);
    auto it = registry().find(estimator);
    LPS_CHECK(it != registry().end(), "unknown flow estimator '" + estimator + "'");
    fn = it->second;
  }
  FlowField flow = fn(frame_a, frame_b);
  LPS_CHECK(flow.height == frame_a.height && flow.width == frame_a.width,
            "estimator returned a mis-shaped flow field");
  check_flow_field(flow);
  return flow;
}

std::pair<double, double> mean_flow_vector(const FlowField& flow) {
  double su = 0.0, sv = 0.0;
  const size_t n = flow.u.size();
  for (size_t i = 0; i < n; ++i) {
    su += flow.u[i];
    sv += flow.v[i];
  }
  return {su / static_cast<double>(n), sv / static_cast<double>(n)};
}

}  // namespace lps::flow
