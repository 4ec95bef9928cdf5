#include "oodkit/tensor.hpp"

#include "oodkit/error.hpp"
#include "oodkit/rng.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace oodkit;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    }
    return m;
}

}  // namespace

TEST_CASE("two-layer relu chain reproduces the hand computation") {
    Matrix x(1, 2);
    x << 1.0, -1.0;
    Matrix w1(2, 2);
    w1 << 2.0, 1.0, 1.0, -1.0;
    Matrix b1(1, 2);
    b1 << 0.5, -1.0;
    Matrix w2(3, 2);
    w2 << 1.0, 2.0, -1.0, 1.0, 0.5, 0.5;
    Matrix b2(1, 3);
    b2 << 0.0, 1.0, -1.0;

    Tensor h = relu(linear(Tensor::constant(x), Tensor::leaf(w1), Tensor::leaf(b1)));
    CHECK(h.value()(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(h.value()(0, 1) == doctest::Approx(1.0).epsilon(1e-15));

    Tensor out = linear(h, Tensor::leaf(w2), Tensor::leaf(b2));
    CHECK(out.value()(0, 0) == doctest::Approx(3.5).epsilon(1e-15));
    CHECK(out.value()(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out.value()(0, 2) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("backward seeds the loss gradient with exactly one") {
    Tensor w = Tensor::leaf(Matrix::Constant(1, 1, 2.0));
    Tensor loss = mean_all(mul(w, w));
    backward(loss);
    CHECK(loss.grad()(0, 0) == 1.0);
    CHECK(w.grad()(0, 0) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("backward requires a scalar loss") {
    Tensor w = Tensor::leaf(Matrix::Zero(2, 2));
    CHECK_THROWS_AS(backward(relu(w)), ContractError);
}

TEST_CASE("constants do not collect gradients, leaves do") {
    Tensor c = Tensor::constant(Matrix::Constant(1, 2, 3.0));
    Tensor w = Tensor::leaf(Matrix::Constant(1, 2, 2.0));
    Tensor loss = sum_all(mul(c, w));
    backward(loss);
    CHECK(!c.requires_grad());
    CHECK(!c.has_grad());
    CHECK(w.has_grad());
    CHECK(w.grad()(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("gradients accumulate additively across reuse") {
    Tensor x = Tensor::leaf(Matrix::Constant(1, 1, 5.0));
    Tensor loss = sum_all(add(x, x));
    backward(loss);
    CHECK(x.grad()(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("softmax rows are normalized and shift invariant") {
    Matrix logits(2, 3);
    logits << 1.0, 2.0, 3.0, -5.0, 0.0, 5.0;
    Tensor p = softmax_rows(Tensor::constant(logits));
    for (int i = 0; i < 2; ++i) {
        CHECK(p.value().row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
    Matrix shifted = logits;
    shifted.array() += 1000.0;  // exercises the max-subtraction stabilization
    Tensor q = softmax_rows(Tensor::constant(shifted));
    CHECK((p.value() - q.value()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("slice and concat route gradients to the right columns") {
    Tensor a = Tensor::leaf(Matrix::Constant(2, 2, 1.0));
    Tensor b = Tensor::leaf(Matrix::Constant(2, 3, 1.0));
    Tensor joined = concat_cols(a, b);
    CHECK(joined.cols() == 5);
    Tensor right = slice_cols(joined, 2, 3);  // exactly the b block
    Tensor loss = sum_all(scale(right, 2.0));
    backward(loss);
    CHECK(b.grad().isApprox(Matrix::Constant(2, 3, 2.0)));
    CHECK(a.grad().isZero());
}

TEST_CASE("elementwise op gradients match central finite differences") {
    Rng rng(20240811);
    const struct {
        const char* name;
        std::function<Tensor(const Tensor&)> op;
        double lo, hi;
    } cases[] = {
        {"relu", [](const Tensor& t) { return relu(t); }, -1.0, 1.0},
        {"sigmoid", [](const Tensor& t) { return sigmoid(t); }, -2.0, 2.0},
        {"exp", [](const Tensor& t) { return exp_op(t); }, -1.0, 1.0},
        {"log", [](const Tensor& t) { return log_clamped(t); }, 0.2, 2.0},
        {"softmax", [](const Tensor& t) { return softmax_rows(t); }, -1.5, 1.5},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        Matrix x = random_matrix(3, 4, rng, c.lo, c.hi);
        const Matrix pattern = random_matrix(3, 4, rng);

        Tensor xt = Tensor::leaf(x);
        Tensor loss = sum_all(mul(c.op(xt), Tensor::constant(pattern)));
        backward(loss);

        const Matrix fd = testsup::numeric_grad(
            [&](const Matrix& m) {
                Tensor probe = sum_all(mul(c.op(Tensor::constant(m)), Tensor::constant(pattern)));
                return probe.scalar();
            },
            x);
        CHECK(testsup::max_rel_err(xt.grad(), fd) < 1e-6);
    }
}

TEST_CASE("linear gradients match finite differences for all three inputs") {
    Rng rng(77);
    Matrix x = random_matrix(4, 3, rng);
    Matrix w = random_matrix(2, 3, rng);
    Matrix b = random_matrix(1, 2, rng);
    const Matrix pattern = random_matrix(4, 2, rng);

    Tensor xt = Tensor::leaf(x);
    Tensor wt = Tensor::leaf(w);
    Tensor bt = Tensor::leaf(b);
    Tensor loss = sum_all(mul(linear(xt, wt, bt), Tensor::constant(pattern)));
    backward(loss);

    const auto probe = [&](const Matrix& xm, const Matrix& wm, const Matrix& bm) {
        Tensor t = sum_all(mul(
            linear(Tensor::constant(xm), Tensor::constant(wm), Tensor::constant(bm)),
            Tensor::constant(pattern)));
        return t.scalar();
    };
    CHECK(testsup::max_rel_err(
              xt.grad(), testsup::numeric_grad([&](const Matrix& m) { return probe(m, w, b); }, x)) <
          1e-6);
    CHECK(testsup::max_rel_err(
              wt.grad(), testsup::numeric_grad([&](const Matrix& m) { return probe(x, m, b); }, w)) <
          1e-6);
    CHECK(testsup::max_rel_err(
              bt.grad(), testsup::numeric_grad([&](const Matrix& m) { return probe(x, w, m); }, b)) <
          1e-6);
}

TEST_CASE("sub, scale and mean combine correctly") {
    Matrix a(1, 2), b(1, 2);
    a << 3.0, 5.0;
    b << 1.0, 2.0;
    Tensor at = Tensor::leaf(a);
    Tensor loss = mean_all(scale(sub(at, Tensor::constant(b)), 3.0));  // mean(3(a-b)) over 2 cells
    CHECK(loss.scalar() == doctest::Approx(7.5).epsilon(1e-15));
    backward(loss);
    CHECK(at.grad().isApprox(Matrix::Constant(1, 2, 1.5)));
}

TEST_CASE("shape mismatches are rejected") {
    Tensor a = Tensor::leaf(Matrix::Zero(2, 2));
    Tensor b = Tensor::leaf(Matrix::Zero(3, 2));
    CHECK_THROWS_AS(add(a, b), DimensionError);
    CHECK_THROWS_AS(mul(a, b), DimensionError);
    CHECK_THROWS_AS(concat_cols(a, b), DimensionError);
    CHECK_THROWS_AS(slice_cols(a, 1, 4), DimensionError);
    CHECK_THROWS_AS(linear(a, Tensor::leaf(Matrix::Zero(2, 3)), Tensor::leaf(Matrix::Zero(1, 2))),
                    DimensionError);
}

TEST_CASE("scalar() rejects non-scalars") {
    Tensor a = Tensor::leaf(Matrix::Zero(2, 2));
    CHECK_THROWS_AS(a.scalar(), ContractError);
}

TEST_CASE("value helpers match the recorded ops") {
    Rng rng(5);
    const Matrix x = random_matrix(3, 5, rng, -3.0, 3.0);
    CHECK(softmax_rows_value(x).isApprox(softmax_rows(Tensor::constant(x)).value(), 1e-15));
    CHECK(sigmoid_value(x).isApprox(sigmoid(Tensor::constant(x)).value(), 1e-15));
}
