#include "oodkit/optimizer.hpp"

#include "oodkit/error.hpp"
#include "oodkit/losses.hpp"
#include "oodkit/rng.hpp"
#include "oodkit/tensor.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace oodkit;

namespace {

Tensor scalar_square(const Tensor& w) {
    // mean over all entries of w^2, so the gradient is 2*w / size
    return mean_all(mul(w, w));
}

}  // namespace

TEST_CASE("plain gradient descent takes the textbook step") {
    Tensor w = Tensor::leaf(Matrix::Constant(1, 1, 1.0));
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::sgd;
    cfg.learning_rate = 0.1;
    Optimizer opt(cfg, {w});

    Tensor loss = scalar_square(w);
    CHECK(loss.scalar() == doctest::Approx(1.0));
    backward(loss);
    opt.step();
    // w <- 1 - 0.1 * 2 = 0.8
    CHECK(w.value()(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("step rejects parameters that never received a gradient") {
    Tensor w = Tensor::leaf(Matrix::Constant(1, 1, 1.0));
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::sgd;
    Optimizer opt(cfg, {w});
    CHECK_THROWS_AS(opt.step(), ContractError);
}

TEST_CASE("step zeroes gradients so accumulation starts fresh") {
    Tensor w = Tensor::leaf(Matrix::Constant(1, 1, 2.0));
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::sgd;
    cfg.learning_rate = 0.5;
    Optimizer opt(cfg, {w});

    backward(scalar_square(w));
    CHECK(w.grad()(0, 0) == doctest::Approx(4.0));
    opt.step();
    CHECK_FALSE(w.has_grad());  // storage cleared, not merely zeroed

    // a second pass accumulates from scratch, not on top of the old gradient
    backward(scalar_square(w));
    CHECK(w.grad()(0, 0) == doctest::Approx(2.0 * w.value()(0, 0)).epsilon(1e-12));
}

TEST_CASE("adadelta replays its published recurrence") {
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::adadelta;
    cfg.learning_rate = 1.0;
    cfg.rho = 0.95;
    cfg.epsilon = 1e-6;

    Tensor w = Tensor::leaf(Matrix::Constant(1, 1, 1.0));
    Optimizer opt(cfg, {w});

    // Independent replay of the accumulator updates.
    double ref_w = 1.0, acc_g = 0.0, acc_u = 0.0;
    for (int it = 0; it < 5; ++it) {
        Tensor loss = scalar_square(w);
        backward(loss);
        const double g = 2.0 * ref_w;  // d/dw of w^2 (single entry, mean is identity)
        CHECK(w.grad()(0, 0) == doctest::Approx(g).epsilon(1e-12));
        opt.step();

        acc_g = cfg.rho * acc_g + (1.0 - cfg.rho) * g * g;
        const double delta =
            -std::sqrt(acc_u + cfg.epsilon) / std::sqrt(acc_g + cfg.epsilon) * g;
        acc_u = cfg.rho * acc_u + (1.0 - cfg.rho) * delta * delta;
        ref_w += cfg.learning_rate * delta;
        CHECK(w.value()(0, 0) == doctest::Approx(ref_w).epsilon(1e-12));
    }
}

TEST_CASE("adam replays its published recurrence") {
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::adam;
    cfg.learning_rate = 0.01;
    cfg.beta1 = 0.9;
    cfg.beta2 = 0.999;
    cfg.epsilon = 1e-8;

    Tensor w = Tensor::leaf(Matrix::Constant(1, 1, 0.7));
    Optimizer opt(cfg, {w});

    double ref_w = 0.7, m = 0.0, v = 0.0;
    for (int it = 1; it <= 5; ++it) {
        backward(scalar_square(w));
        const double g = 2.0 * ref_w;
        opt.step();

        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
        const double mhat = m / (1.0 - std::pow(cfg.beta1, it));
        const double vhat = v / (1.0 - std::pow(cfg.beta2, it));
        ref_w -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        CHECK(w.value()(0, 0) == doctest::Approx(ref_w).epsilon(1e-12));
    }
}

TEST_CASE("adadelta drives a quadratic toward its minimum") {
    OptimizerConfig cfg;  // defaults: adadelta, lr 0.1
    Tensor w = Tensor::leaf(Matrix::Constant(2, 3, 1.5));
    Optimizer opt(cfg, {w});
    double first = 0.0, last = 0.0;
    for (int it = 0; it < 400; ++it) {
        Tensor loss = scalar_square(w);
        if (it == 0) first = loss.scalar();
        last = loss.scalar();
        backward(loss);
        opt.step();
    }
    CHECK(first == doctest::Approx(2.25));
    CHECK(last < 0.05 * first);
}

TEST_CASE("optimizer updates several parameters independently") {
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::sgd;
    cfg.learning_rate = 0.5;
    Tensor a = Tensor::leaf(Matrix::Constant(1, 1, 1.0));
    Tensor b = Tensor::leaf(Matrix::Constant(1, 1, -2.0));
    Optimizer opt(cfg, {a, b});

    // loss = mean((a+b)^2): d/da = d/db = 2(a+b)/1 = -2
    Tensor loss = mean_all(mul(add(a, b), add(a, b)));
    backward(loss);
    opt.step();
    CHECK(a.value()(0, 0) == doctest::Approx(1.0 - 0.5 * (-2.0)).epsilon(1e-15));
    CHECK(b.value()(0, 0) == doctest::Approx(-2.0 - 0.5 * (-2.0)).epsilon(1e-15));
}
