#include "ulm/neural/optim.hpp"

#include <cmath>

namespace ulm::nn {

template <typename T>
void adam_step(std::vector<Parameter<T>>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state, double lr,
               const AdamConfig& cfg) {
    if (grads.size() != params.size()) throw ContractError("Adam: gradient list does not match the parameters");
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.value.shape);
            state.v.emplace_back(p.value.shape);
        }
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor<T>& w = params[k].value;
        const Tensor<T>& g = grads[k];
        if (g.shape != w.shape)
            throw ContractError("Adam: gradient " + shape_string(g.shape) + " for " + params[k].name + " " +
                                shape_string(w.shape));
        Tensor<T>& m = state.m[k];
        Tensor<T>& v = state.v[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = g[i];
            const double mi = cfg.beta1 * m[i] + (1 - cfg.beta1) * gi;
            const double vi = cfg.beta2 * v[i] + (1 - cfg.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            w[i] = static_cast<T>(w[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps));
        }
    }
}

template void adam_step(std::vector<Parameter<float>>&, const std::vector<Tensor<float>>&, AdamState<float>&, double,
                        const AdamConfig&);
template void adam_step(std::vector<Parameter<double>>&, const std::vector<Tensor<double>>&, AdamState<double>&,
                        double, const AdamConfig&);

double lr_at_epoch(const LRSchedule& schedule, int epoch) {
    if (epoch < 0) throw ContractError("epoch must be nonnegative");
    double lr = schedule.start;
    for (int m : schedule.milestones)
        if (m <= epoch) lr *= schedule.gamma;
    return lr;
}

}  // namespace ulm::nn
