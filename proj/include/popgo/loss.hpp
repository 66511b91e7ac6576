#pragma once

#include <span>
#include <vector>

namespace popgo {

struct LossGrad {
    double loss = 0.0;
    std::vector<double> dscore;  // gradient w.r.t. each input score
};

// Sampled softmax loss over one candidate set. scores[0] is the positive,
// scores[1..] the sampled negatives (the candidate set N_u+). The softmax is
// computed with max-subtraction, so any finite inputs stay finite.
//
//   loss     = -log( exp(s_0/tau) / sum_k exp(s_k/tau) )
//   dscore_k = (softmax_k - [k == 0]) / tau
LossGrad sampled_softmax_loss(std::span<const double> scores, double tau);

// Masked objective: sampled softmax applied to elementwise products
// alpha_k * beta_k, with beta treated as constants (the shortcut model is
// frozen). Gradients are w.r.t. alpha only.
LossGrad popgo_loss(std::span<const double> alpha, std::span<const double> beta, double tau);

}  // namespace popgo
