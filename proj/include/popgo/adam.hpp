#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace popgo {

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam update. L2 regularization enters as 2*l2*param added
// to the gradient before the moment updates.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr, double l2);

}  // namespace popgo
