#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "gradsplit/tape.hpp"
#include "gradsplit/tensor.hpp"
#include "oracles.hpp"

using namespace gradsplit;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    return Tensor::uniform(std::move(shape), lo, hi, rng);
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.numel() == b.numel() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.numel())) == 0;
}

}  // namespace

TEST_CASE("matmul identity and projection") {
    Tape tape(false);
    Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    Tensor m = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor prod = matmul(tape, eye, m);
    for (int i = 0; i < 4; ++i) CHECK(prod.at(i) == m.at(i));

    Tensor proj = Tensor::from_data({2, 2}, {1, 0, 0, 0});
    Tensor v = Tensor::from_data({2, 1}, {5, 7});
    Tensor pv = matmul(tape, proj, v);
    CHECK(pv.at(0) == 5.0);
    CHECK(pv.at(1) == 0.0);
}

TEST_CASE("matmul matches triple-loop reference") {
    Rng rng(11);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    Tape tape(false);
    Tensor got = matmul(tape, a, b);
    Tensor want = oracles::matmul_ref(a, b);
    for (std::int64_t i = 0; i < got.numel(); ++i) {
        CHECK(std::abs(got.at(i) - want.at(i)) <= 1e-12);
    }
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tape tape(false);
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 2});
    try {
        matmul(tape, a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x2]") != std::string::npos);
    }
}

TEST_CASE("conv2d scalar kernel doubles input") {
    Tape tape(false);
    Tensor input = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor kernel = Tensor::from_data({1, 1, 1, 1}, {2.0});
    Tensor out = conv2d(tape, input, kernel, 1, 0);
    CHECK(out.shape() == Shape{1, 1, 3, 3});
    for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out.at(i) == 2.0);
}

TEST_CASE("conv2d full-window kernel sums the input") {
    Tape tape(false);
    Rng rng(3);
    Tensor input = random_tensor({1, 1, 3, 3}, rng);
    Tensor kernel = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor out = conv2d(tape, input, kernel, 1, 0);
    CHECK(out.shape() == Shape{1, 1, 1, 1});
    double total = 0.0;
    for (std::int64_t i = 0; i < input.numel(); ++i) total += input.at(i);
    CHECK(out.at(0) == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("conv2d matches six-loop reference") {
    Rng rng(7);
    Tensor input = random_tensor({2, 3, 8, 8}, rng);
    Tensor kernel = random_tensor({4, 3, 3, 3}, rng);
    for (auto [stride, padding] : {std::pair<int, int>{1, 0}, {2, 1}, {3, 2}}) {
        Tape tape(false);
        Tensor got = conv2d(tape, input, kernel, stride, padding);
        Tensor want = oracles::conv2d_ref(input, kernel, stride, padding);
        REQUIRE(got.shape() == want.shape());
        for (std::int64_t i = 0; i < got.numel(); ++i) {
            CHECK(std::abs(got.at(i) - want.at(i)) <= 1e-12);
        }
    }
}

TEST_CASE("conv2d rejects kernels larger than the padded input") {
    Tape tape(false);
    Tensor input = Tensor::zeros({1, 1, 3, 3});
    Tensor kernel = Tensor::zeros({1, 1, 5, 5});
    CHECK_THROWS_AS(conv2d(tape, input, kernel, 1, 0), DimensionError);
    CHECK_NOTHROW(conv2d(tape, input, kernel, 1, 1));
}

TEST_CASE("softmax symmetry, shift invariance, and hand values") {
    Tape tape(false);
    Tensor two = softmax(tape, Tensor::from_data({1, 2}, {0.0, 0.0}));
    CHECK(two.at(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(two.at(1) == doctest::Approx(0.5).epsilon(1e-12));

    Tensor flat = softmax(tape, Tensor::from_data({1, 4}, {3.3, 3.3, 3.3, 3.3}));
    for (int i = 0; i < 4; ++i) CHECK(flat.at(i) == doctest::Approx(0.25).epsilon(1e-12));

    Tensor pair = softmax(tape, Tensor::from_data({1, 2}, {1.0, 2.0}));
    const double e = std::exp(1.0);
    CHECK(pair.at(0) == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-9));
    CHECK(pair.at(1) == doctest::Approx(e / (1.0 + e)).epsilon(1e-9));
}

TEST_CASE("softmax rows sum to one and shift is invisible") {
    Rng rng(21);
    Tape tape(false);
    Tensor x = random_tensor({16, 10}, rng, -50.0, 50.0);
    Tensor y = softmax(tape, x);
    for (std::int64_t r = 0; r < 16; ++r) {
        double row_sum = 0.0;
        for (std::int64_t j = 0; j < 10; ++j) {
            const double v = y.at(r * 10 + j);
            CHECK(v >= 0.0);
            row_sum += v;
        }
        CHECK(std::abs(row_sum - 1.0) <= 1e-12);
    }

    Tensor shifted = x.clone();
    for (std::int64_t r = 0; r < 16; ++r) {
        for (std::int64_t j = 0; j < 10; ++j) shifted.at(r * 10 + j) += 17.25;
    }
    Tensor ys = softmax(tape, shifted);
    for (std::int64_t i = 0; i < y.numel(); ++i) {
        CHECK(std::abs(y.at(i) - ys.at(i)) <= 1e-12);
    }
}

TEST_CASE("softmax stays finite on large-magnitude inputs") {
    Tape tape(false);
    Tensor x = Tensor::from_data({1, 3}, {1000.0, -1000.0, 999.0});
    Tensor y = softmax(tape, x);
    CHECK(all_finite(y));
}

TEST_CASE("backward on sum gives all-ones gradient") {
    Rng rng(5);
    Tensor theta = random_tensor({3, 4}, rng);
    Tape tape;
    Tensor root = sum(tape, theta);
    tape.backward(root);
    REQUIRE(theta.has_grad());
    for (std::int64_t i = 0; i < theta.numel(); ++i) CHECK(theta.grad()[i] == 1.0);
}

TEST_CASE("backward on sum of squares gives 2*theta") {
    Rng rng(6);
    Tensor theta = random_tensor({5}, rng);
    Tape tape;
    Tensor root = sum(tape, mul(tape, theta, theta));
    tape.backward(root);
    for (std::int64_t i = 0; i < theta.numel(); ++i) {
        CHECK(theta.grad()[i] == doctest::Approx(2.0 * theta.at(i)).epsilon(1e-12));
    }
}

TEST_CASE("gradients accumulate across shared subexpressions") {
    Tensor x = Tensor::from_data({2}, {1.5, -0.5});
    Tape tape;
    Tensor root = sum(tape, add(tape, x, x));
    tape.backward(root);
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 2.0);
}

TEST_CASE("backward requires a scalar root; unreachable tensors untouched") {
    Tensor x = Tensor::from_data({2}, {1.0, 2.0});
    Tape tape;
    Tensor doubled = add(tape, x, x);
    CHECK_THROWS_AS(tape.backward(doubled), ContractError);

    Tensor detached = Tensor::from_data({2}, {3.0, 4.0});
    Tensor root = sum(tape, doubled);
    tape.backward(root);
    CHECK_FALSE(detached.has_grad());
}

// Gradient-check property: reverse-mode gradients match central finite
// differences on >= 100 random coordinates per op.
TEST_CASE("per-op gradients match finite differences") {
    Rng rng(33);

    auto fd_check_unary = [&](const char* name, auto make_loss, Shape shape, double lo, double hi,
                              std::uint64_t seed) {
        CAPTURE(name);
        Tensor x = random_tensor(shape, rng, lo, hi);
        std::vector<Tensor> params = {x};
        auto loss_value = [&]() {
            Tape t(false);
            return make_loss(t, x).item();
        };
        Tape t;
        Tensor root = make_loss(t, x);
        t.backward(root);
        auto tape_grad = [&](std::size_t, std::int64_t flat) { return x.grad()[flat]; };
        auto report = oracles::check_gradients(params, loss_value, tape_grad, 100, seed);
        CHECK(report.checked == 100);
        CHECK(report.failures == 0);
    };

    fd_check_unary("tanh", [](Tape& t, Tensor& x) { return sum(t, tanh_act(t, x)); },
                   {6, 7}, -2.0, 2.0, 1);
    // Keep relu coordinates away from the kink so central differences are valid.
    fd_check_unary("relu", [](Tape& t, Tensor& x) { return sum(t, mul(t, relu(t, x), relu(t, x))); },
                   {6, 7}, 0.25, 2.0, 2);
    fd_check_unary("softmax", [](Tape& t, Tensor& x) {
        Tensor y = softmax(t, x);
        return sum(t, mul(t, y, y));
    }, {5, 8}, -2.0, 2.0, 3);
    fd_check_unary("log_softmax", [](Tape& t, Tensor& x) {
        Tensor y = log_softmax(t, x);
        return mean(t, mul(t, y, y));
    }, {5, 8}, -2.0, 2.0, 4);
    fd_check_unary("scale+sub", [](Tape& t, Tensor& x) {
        return sum(t, sub(t, scale(t, x, 3.0), mul(t, x, x)));
    }, {9, 5}, -2.0, 2.0, 5);
    fd_check_unary("reshape", [](Tape& t, Tensor& x) {
        Tensor r = reshape(t, x, {x.numel(), 1});
        return sum(t, mul(t, r, r));
    }, {6, 6}, -2.0, 2.0, 6);

    SUBCASE("matmul") {
        Tensor a = random_tensor({5, 6}, rng);
        Tensor b = random_tensor({6, 4}, rng);
        std::vector<Tensor> params = {a, b};
        auto make_loss = [&](Tape& t) {
            Tensor p = matmul(t, a, b);
            return sum(t, mul(t, p, p));
        };
        auto loss_value = [&]() {
            Tape t(false);
            return make_loss(t).item();
        };
        Tape t;
        Tensor root = make_loss(t);
        t.backward(root);
        auto tape_grad = [&](std::size_t pi, std::int64_t flat) { return params[pi].grad()[flat]; };
        auto report = oracles::check_gradients(params, loss_value, tape_grad, 100, 7);
        CHECK(report.failures == 0);
    }

    SUBCASE("conv2d with bias") {
        Tensor input = random_tensor({2, 2, 6, 6}, rng);
        Tensor kernel = random_tensor({3, 2, 3, 3}, rng);
        Tensor bias = random_tensor({3}, rng);
        std::vector<Tensor> params = {input, kernel, bias};
        auto make_loss = [&](Tape& t) {
            Tensor y = add_channel_bias(t, conv2d(t, input, kernel, 2, 1), bias);
            return mean(t, mul(t, y, y));
        };
        auto loss_value = [&]() {
            Tape t(false);
            return make_loss(t).item();
        };
        Tape t;
        Tensor root = make_loss(t);
        t.backward(root);
        auto tape_grad = [&](std::size_t pi, std::int64_t flat) { return params[pi].grad()[flat]; };
        auto report = oracles::check_gradients(params, loss_value, tape_grad, 100, 8);
        CHECK(report.failures == 0);
    }

    SUBCASE("add_rowwise") {
        Tensor m = random_tensor({7, 5}, rng);
        Tensor bias = random_tensor({5}, rng);
        std::vector<Tensor> params = {m, bias};
        auto make_loss = [&](Tape& t) {
            Tensor y = add_rowwise(t, m, bias);
            return sum(t, mul(t, y, y));
        };
        auto loss_value = [&]() {
            Tape t(false);
            return make_loss(t).item();
        };
        Tape t;
        Tensor root = make_loss(t);
        t.backward(root);
        auto tape_grad = [&](std::size_t pi, std::int64_t flat) { return params[pi].grad()[flat]; };
        auto report = oracles::check_gradients(params, loss_value, tape_grad, 100, 9);
        CHECK(report.failures == 0);
    }
}

TEST_CASE("ops are bitwise deterministic") {
    Rng rng_a(99), rng_b(99);
    Tensor a1 = random_tensor({8, 8}, rng_a);
    Tensor a2 = random_tensor({8, 8}, rng_b);
    CHECK(bitwise_equal(a1, a2));

    Tape tape(false);
    Tensor b = Tensor::uniform({8, 8}, -1, 1, rng_a);
    Tensor c = Tensor::uniform({8, 8}, -1, 1, rng_b);
    CHECK(bitwise_equal(matmul(tape, a1, b), matmul(tape, a2, c)));
    CHECK(bitwise_equal(softmax(tape, a1), softmax(tape, a2)));
}

TEST_CASE("forward ops keep finite inputs finite") {
    Rng rng(123);
    Tape tape(false);
    Tensor x = random_tensor({4, 6}, rng, -30.0, 30.0);
    CHECK(all_finite(tanh_act(tape, x)));
    CHECK(all_finite(relu(tape, x)));
    CHECK(all_finite(log_softmax(tape, x)));
    CHECK(all_finite(mul(tape, x, x)));
}

TEST_CASE("slice and gather copy the expected rows") {
    Tensor t = Tensor::from_data({4, 2}, {0, 1, 10, 11, 20, 21, 30, 31});
    Tensor s = slice_rows(t, 1, 3);
    CHECK(s.shape() == Shape{2, 2});
    CHECK(s.at(0) == 10.0);
    CHECK(s.at(3) == 21.0);
    Tensor g = gather_rows(t, {3, 0});
    CHECK(g.at(0) == 30.0);
    CHECK(g.at(2) == 0.0);
    CHECK_THROWS_AS(gather_rows(t, {4}), ContractError);
}
