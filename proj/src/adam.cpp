#include "popgo/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace popgo {

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr, double l2) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size()) {
        throw std::invalid_argument("adam_step: shape mismatch");
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        const double g = grads[p] + 2.0 * l2 * params[p];
        state.m[p] = state.beta1 * state.m[p] + (1.0 - state.beta1) * g;
        state.v[p] = state.beta2 * state.v[p] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m[p] / bc1;
        const double vhat = state.v[p] / bc2;
        params[p] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

}  // namespace popgo
