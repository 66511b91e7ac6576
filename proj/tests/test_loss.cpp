#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "popgo/loss.hpp"
#include "popgo/rng.hpp"

using namespace popgo;

namespace {

// central-difference oracle over one coordinate
template <typename F>
double fdiff(F f, std::vector<double> x, std::size_t k, double h) {
    x[k] += h;
    double up = f(x);
    x[k] -= 2 * h;
    double dn = f(x);
    return (up - dn) / (2 * h);
}

}  // namespace

TEST_CASE("uniform candidates give ln(n) loss") {
    std::vector<double> scores(65, 0.3);
    LossGrad lg = sampled_softmax_loss(scores, 0.07);
    CHECK(std::abs(lg.loss - std::log(65.0)) < 1e-9);
}

TEST_CASE("loss decreases monotonically as the positive grows") {
    std::vector<double> scores(9, 0.2);
    double prev = sampled_softmax_loss(scores, 0.07).loss;
    for (double bump = 0.01; bump < 0.2; bump += 0.01) {
        scores[0] = 0.2 + bump;
        double cur = sampled_softmax_loss(scores, 0.07).loss;
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("softmax gradients match finite differences") {
    // vector-norm relative error: per-component ratios are meaningless for
    // softmax tails below the finite-difference truncation noise
    Rng rng(12);
    const double h = 1e-5;
    const double tau = 0.07;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> scores(8);
        for (double& s : scores) s = rng.uniform() * 2.0 - 1.0;
        LossGrad lg = sampled_softmax_loss(scores, tau);
        double diff2 = 0.0, fd2 = 0.0;
        for (std::size_t k = 0; k < scores.size(); ++k) {
            double fd = fdiff([&](const std::vector<double>& x) {
                return sampled_softmax_loss(x, tau).loss;
            }, scores, k, h);
            diff2 += (lg.dscore[k] - fd) * (lg.dscore[k] - fd);
            fd2 += fd * fd;
        }
        CHECK(std::sqrt(diff2) <= 1e-4 * std::sqrt(fd2) + 1e-7);
    }
}

TEST_CASE("identity mask reproduces the plain loss exactly") {
    Rng rng(30);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> alpha(12), ones(12, 1.0);
        for (double& a : alpha) a = rng.uniform() * 2.0 - 1.0;
        LossGrad plain = sampled_softmax_loss(alpha, 0.07);
        LossGrad masked = popgo_loss(alpha, ones, 0.07);
        CHECK(masked.loss == plain.loss);
        CHECK(masked.dscore == plain.dscore);
    }
}

TEST_CASE("zero mask blanks the gradients and fixes the loss") {
    std::vector<double> alpha = {0.9, -0.4, 0.2, 0.7, -0.8};
    std::vector<double> zeros(alpha.size(), 0.0);
    LossGrad lg = popgo_loss(alpha, zeros, 0.07);
    CHECK(lg.loss == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    for (double g : lg.dscore) CHECK(g == 0.0);
}

TEST_CASE("masked gradients match finite differences") {
    Rng rng(31);
    const double h = 1e-5;
    const double tau = 0.07;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> alpha(8), beta(8);
        for (double& a : alpha) a = rng.uniform() * 2.0 - 1.0;
        for (double& b : beta) b = 0.05 + 0.9 * rng.uniform();
        LossGrad lg = popgo_loss(alpha, beta, tau);
        double diff2 = 0.0, fd2 = 0.0;
        for (std::size_t k = 0; k < alpha.size(); ++k) {
            double fd = fdiff([&](const std::vector<double>& x) {
                return popgo_loss(x, beta, tau).loss;
            }, alpha, k, h);
            diff2 += (lg.dscore[k] - fd) * (lg.dscore[k] - fd);
            fd2 += fd * fd;
        }
        CHECK(std::sqrt(diff2) <= 1e-4 * std::sqrt(fd2) + 1e-7);
    }
}

TEST_CASE("max subtraction keeps extreme logits finite") {
    std::vector<double> scores = {49.0, -49.0, 20.0, -20.0};  // |s/tau| up to 700
    LossGrad lg = sampled_softmax_loss(scores, 0.07);
    CHECK(std::isfinite(lg.loss));
    for (double g : lg.dscore) CHECK(std::isfinite(g));
    CHECK(lg.loss >= 0.0);
}

TEST_CASE("degenerate inputs are rejected") {
    std::vector<double> s = {0.1, 0.2};
    CHECK_THROWS_AS(sampled_softmax_loss(s, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(sampled_softmax_loss({}, 0.07), std::invalid_argument);
    std::vector<double> b = {0.5};
    CHECK_THROWS_AS(popgo_loss(s, b, 0.07), std::invalid_argument);
}
