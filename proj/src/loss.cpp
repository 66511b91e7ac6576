#include "popgo/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace popgo {

namespace {

LossGrad softmax_xent(std::span<const double> logits, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("temperature must be positive");
    if (logits.empty()) throw std::invalid_argument("empty candidate set");
    const std::size_t n = logits.size();
    double mx = logits[0] / tau;
    for (std::size_t k = 1; k < n; ++k) mx = std::max(mx, logits[k] / tau);
    LossGrad out;
    out.dscore.resize(n);
    double z = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        out.dscore[k] = std::exp(logits[k] / tau - mx);  // unnormalized p_k
        z += out.dscore[k];
    }
    out.loss = std::log(z) + mx - logits[0] / tau;
    for (std::size_t k = 0; k < n; ++k) {
        out.dscore[k] = out.dscore[k] / z / tau;
    }
    out.dscore[0] -= 1.0 / tau;
    return out;
}

}  // namespace

LossGrad sampled_softmax_loss(std::span<const double> scores, double tau) {
    return softmax_xent(scores, tau);
}

LossGrad popgo_loss(std::span<const double> alpha, std::span<const double> beta, double tau) {
    if (alpha.size() != beta.size()) {
        throw std::invalid_argument("popgo_loss: alpha/beta size mismatch");
    }
    std::vector<double> masked(alpha.size());
    for (std::size_t k = 0; k < alpha.size(); ++k) masked[k] = alpha[k] * beta[k];
    LossGrad out = softmax_xent(masked, tau);
    for (std::size_t k = 0; k < alpha.size(); ++k) out.dscore[k] *= beta[k];
    return out;
}

}  // namespace popgo
