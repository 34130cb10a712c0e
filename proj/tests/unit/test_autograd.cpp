// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rucgan/error.hpp"
#include "support.hpp"

using namespace rucgan;
using testing::gradient_check;

namespace {

constexpr double kTol = 1e-6;

// Weighted sum so every output element gets a distinct upstream gradient.
ag::Var probe(const ag::Var& y, const Tensor& weights) {
    return ag::mean(ag::mul(y, ag::Var(weights)));
}

}  // namespace

TEST_CASE("elementwise ops") {
    Rng rng(1);
    ag::Var a(testing::random_tensor({2, 3, 2, 2}, rng), true);
    ag::Var b(testing::random_tensor({2, 3, 2, 2}, rng), true);
    const Tensor w = testing::random_tensor({2, 3, 2, 2}, rng);
    CHECK(gradient_check(a, [&] { return probe(ag::add(a, b), w); }) < kTol);
    CHECK(gradient_check(b, [&] { return probe(ag::sub(a, b), w); }) < kTol);
    CHECK(gradient_check(a, [&] { return probe(ag::mul(a, b), w); }) < kTol);
    CHECK(gradient_check(a, [&] { return probe(ag::scale(a, -2.5), w); }) < kTol);
    CHECK(gradient_check(a, [&] { return probe(ag::add_scalar(a, 0.3), w); }) < kTol);
    CHECK(gradient_check(a, [&] { return probe(ag::tanh(a), w); }) < kTol);
    CHECK(gradient_check(a, [&] { return probe(ag::leaky_relu(a, 0.2), w); }) < kTol);
    CHECK(gradient_check(a, [&] { return probe(ag::relu(a), w); }) < kTol);
    CHECK(gradient_check(a, [&] { return ag::mean_abs_diff(a, b); }) < kTol);
}

TEST_CASE("spatial ops") {
    Rng rng(2);
    ag::Var x(testing::random_tensor({2, 2, 4, 4}, rng), true);
    const Tensor wu = testing::random_tensor({2, 2, 8, 8}, rng);
    const Tensor wp = testing::random_tensor({2, 2, 2, 2}, rng);
    CHECK(gradient_check(x, [&] { return probe(ag::upsample_nearest2x(x), wu); }) < kTol);
    CHECK(gradient_check(x, [&] { return probe(ag::avg_pool2x(x), wp); }) < kTol);
}

TEST_CASE("conv2d gradients for input, weight and bias") {
    Rng rng(3);
    ag::Var x(testing::random_tensor({2, 3, 5, 5}, rng), true);
    ag::Var w(testing::random_tensor({4, 3, 3, 3}, rng), true);
    ag::Var b(testing::random_tensor({4}, rng), true);
    const Tensor wo = testing::random_tensor({2, 4, 5, 5}, rng);
    const auto f = [&] { return probe(ag::conv2d(x, w, b, {1, 1}), wo); };
    CHECK(gradient_check(x, f) < kTol);
    CHECK(gradient_check(w, f) < kTol);
    CHECK(gradient_check(b, f) < kTol);
    const Tensor ws = testing::random_tensor({2, 4, 2, 2}, rng);
    ag::Var x2(testing::random_tensor({2, 3, 4, 4}, rng), true);
    ag::Var w2(testing::random_tensor({4, 3, 4, 4}, rng), true);
    const auto g = [&] { return probe(ag::conv2d(x2, w2, std::nullopt, {2, 1}), ws); };
    CHECK(gradient_check(x2, g) < kTol);
    CHECK(gradient_check(w2, g) < kTol);
}

TEST_CASE("concat and slice") {
    Rng rng(4);
    ag::Var a(testing::random_tensor({2, 2, 3, 3}, rng), true);
    ag::Var b(testing::random_tensor({2, 3, 3, 3}, rng), true);
    const Tensor wc = testing::random_tensor({2, 5, 3, 3}, rng);
    CHECK(gradient_check(b, [&] { return probe(ag::concat_channels({a, b}), wc); }) < kTol);
    ag::Var c(testing::random_tensor({1, 2, 3, 3}, rng), true);
    const Tensor wb = testing::random_tensor({3, 2, 3, 3}, rng);
    CHECK(gradient_check(c, [&] { return probe(ag::concat_batch({a, c}), wb); }) < kTol);
    const Tensor ws = testing::random_tensor({1, 2, 3, 3}, rng);
    CHECK(gradient_check(a, [&] { return probe(ag::slice_batch(a, 1, 2), ws); }) < kTol);
    const ag::Var s = ag::slice_batch(a, 1, 2);
    CHECK(s.value().at(0, 1, 2, 2) == a.value().at(1, 1, 2, 2));
}

TEST_CASE("normalizations") {
    Rng rng(5);
    ag::Var h(testing::random_tensor({2, 3, 3, 3}, rng), true);
    const Tensor w = testing::random_tensor({2, 3, 3, 3}, rng);
    CHECK(gradient_check(h, [&] { return probe(ag::batch_standardize(h, 1e-5), w); }) < 1e-5);
    CHECK(gradient_check(h, [&] { return probe(ag::instance_norm(h, 1e-5), w); }) < 1e-5);
}

TEST_CASE("batch standardization of a constant channel is zero") {
    ag::Var h(Tensor({2, 1, 2, 2}, 3.0), true);
    const ag::Var y = ag::batch_standardize(h, 1e-5);
    CHECK(y.value().max_abs() == 0.0);
}

TEST_CASE("noise injection and spectral division") {
    Rng rng(6);
    ag::Var h(testing::random_tensor({2, 3, 2, 2}, rng), true);
    ag::Var s(testing::random_tensor({3}, rng), true);
    const Tensor noise = testing::random_tensor({2, 1, 2, 2}, rng);
    const Tensor w = testing::random_tensor({2, 3, 2, 2}, rng);
    CHECK(gradient_check(s, [&] { return probe(ag::add_channel_noise(h, s, noise), w); }) < kTol);
    CHECK(gradient_check(h, [&] { return probe(ag::add_channel_noise(h, s, noise), w); }) < kTol);

    // σ = uᵀWv with u, v held fixed, so dσ/dW = u vᵀ exactly. Positive u, v
    // and a positive W keep σ away from zero.
    Tensor w0 = testing::random_tensor({3, 2, 2, 2}, rng, 0.1, 1.0);
    ag::Var wt(w0, true);
    const Tensor u = testing::random_tensor({3}, rng, 0.1, 1.0);
    const Tensor v = testing::random_tensor({8}, rng, 0.1, 1.0);
    const Tensor wo = testing::random_tensor({3, 2, 2, 2}, rng);
    CHECK(gradient_check(wt, [&] { return probe(ag::spectral_divide(wt, u, v), wo); }) < kTol);
}

TEST_CASE("no-grad guard suppresses graph recording") {
    ag::Var a(Tensor({2}, 1.0), true);
    {
        ag::NoGradGuard ng;
        CHECK_FALSE(ag::grad_enabled());
        const ag::Var y = ag::scale(a, 2.0);
        CHECK_FALSE(y.requires_grad());
    }
    CHECK(ag::grad_enabled());
    CHECK(ag::scale(a, 2.0).requires_grad());
}

TEST_CASE("detached branches receive no gradient") {
    ag::Var a(Tensor({3}, 2.0), true);
    const ag::Var loss = ag::mean(ag::mul(ag::detach(a), a));
    ag::backward(loss);
    for (double g : a.grad().data()) {
        CHECK(g == doctest::Approx(2.0 / 3.0));
    }
}

TEST_CASE("gradients accumulate across backward calls on leaves") {
    ag::Var a(Tensor({2}, 1.0), true);
    ag::backward(ag::mean(a));
    ag::backward(ag::mean(a));
    CHECK(a.grad()[0] == doctest::Approx(1.0));
    a.zero_grad();
    CHECK(a.grad().empty());
}

TEST_CASE("shape errors are reported") {
    CHECK_THROWS_AS(ag::add(ag::Var(Tensor({2})), ag::Var(Tensor({3}))), DimensionError);
    CHECK_THROWS_AS(ag::avg_pool2x(ag::Var(Tensor({1, 1, 1, 3}))), DimensionError);
    // Odd sizes drop the trailing row and column.
    CHECK(ag::avg_pool2x(ag::Var(Tensor({1, 1, 3, 5}))).shape() == Shape{1, 1, 1, 2});
}
