#include "ssae/adam.hpp"

#include <cmath>
#include <string>

namespace ssae::ad {

AdamState make_adam_state(const std::vector<Tensor*>& params, const AdamConfig& config) {
    AdamState st;
    st.config = config;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const Tensor* p : params) {
        st.m.emplace_back(p->numel(), 0.0);
        st.v.emplace_back(p->numel(), 0.0);
    }
    return st;
}

void adam_step(AdamState& state, const std::vector<Tensor*>& params) {
    if (params.size() != state.m.size()) {
        throw ContractError("adam_step: parameter count changed since state creation");
    }
    state.step += 1;
    const AdamConfig& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = *params[pi];
        if (p.grad.size() != p.values.size()) {
            throw ContractError("adam_step: missing gradient for parameter " +
                                std::to_string(pi));
        }
        auto& m = state.m[pi];
        auto& v = state.v[pi];
        if (m.size() != p.values.size()) {
            throw ContractError("adam_step: parameter " + std::to_string(pi) +
                                " shape changed since state creation");
        }
        for (std::size_t i = 0; i < p.values.size(); ++i) {
            const double g = p.grad[i];
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.values[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
        }
    }
}

}  // namespace ssae::ad
