#pragma once

#include <vector>

#include "ulm/neural/model.hpp"

namespace ulm::nn {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    long step = 0;
};

// One bias-corrected Adam update; state is lazily sized on the first call.
template <typename T>
void adam_step(std::vector<Parameter<T>>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state, double lr,
               const AdamConfig& cfg = {});

// lr = start * gamma^k, k = number of milestones <= epoch.
struct LRSchedule {
    double start = 0.1;
    std::vector<int> milestones;
    double gamma = 0.1;
};

double lr_at_epoch(const LRSchedule& schedule, int epoch);

}  // namespace ulm::nn
