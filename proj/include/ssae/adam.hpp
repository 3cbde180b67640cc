#pragma once

#include <cstdint>
#include <vector>

#include "ssae/autodiff.hpp"

namespace ssae::ad {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard Adam with bias correction. One state instance per optimized
// parameter set; `step` increments by exactly 1 per update.
struct AdamState {
    AdamConfig config;
    std::int64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

AdamState make_adam_state(const std::vector<Tensor*>& params, const AdamConfig& config);

// Applies one update using each tensor's populated `grad` buffer.
// Throws ContractError when a gradient is missing or mis-sized.
void adam_step(AdamState& state, const std::vector<Tensor*>& params);

}  // namespace ssae::ad
