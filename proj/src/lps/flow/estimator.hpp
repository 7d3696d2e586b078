#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lps/core/image.hpp"
#include "lps/flow/flow_field.hpp"

namespace lps::flow {

using FlowEstimatorFn = std::function<FlowField(const Image&, const Image&)>;

// Estimators are pluggable behind config key flow.estimator; "lk_pyramid"
// (the built-in coarse-to-fine differential method) is always registered.
void register_flow_estimator(const std::string& name, FlowEstimatorFn fn);
std::vector<std::string> flow_estimator_names();

// Dense flow from frame_a to frame_b. Validates input shapes and the
// returned field (finite entries, displacement bound). Pure per call.
FlowField compute_flow(const Image& frame_a, const Image& frame_b,
                       const std::string& estimator = "lk_pyramid");

// Mean displacement vector over all pixels; the per-step motion summary used
// by the cross-embodiment similarity checks.
std::pair<double, double> mean_flow_vector(const FlowField& flow);

}  // namespace lps::flow
