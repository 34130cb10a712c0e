// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rucgan/error.hpp"
#include "rucgan/objectives.hpp"
#include "support.hpp"

using namespace rucgan;

namespace {

ag::Var var(const Shape& s, double fill) {
    return ag::Var(Tensor(s, fill));
}

ag::Var scalar(double v) {
    return ag::Var(Tensor::scalar(v));
}

}  // namespace

TEST_CASE("perceptual loss examples") {
    const IdentityBackbone id;
    Rng rng(71);
    const ag::Var x(testing::random_tensor({1, 3, 4, 4}, rng)), y(testing::random_tensor({1, 3, 4, 4}, rng));
    CHECK(perceptual_loss(x, x, &id).item() == 0.0);
    CHECK(perceptual_loss(x, y, &id).item() == perceptual_loss(y, x, &id).item());
    CHECK(perceptual_loss(var({1, 3, 2, 2}, 1.0), var({1, 3, 2, 2}, 0.0), &id).item() == doctest::Approx(1.0));
    CHECK_THROWS_AS(perceptual_loss(x, y, nullptr), ConfigurationError);
    CHECK_THROWS_AS(perceptual_loss(x, var({1, 3, 2, 2}, 0.0), &id), DimensionError);
}

TEST_CASE("perceptual loss averages layers uniformly") {
    const ConvBackbone bb(3, {4, 4, 4});
    Rng rng(72);
    const ag::Var x(testing::random_tensor({1, 3, 8, 8}, rng)), y(testing::random_tensor({1, 3, 8, 8}, rng));
    const auto fx = bb.features(x), fy = bb.features(y);
    REQUIRE(fx.size() == 3);
    double expected = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        double s = 0;
        for (std::size_t k = 0; k < fx[i].value().numel(); ++k) s += std::abs(fx[i].value()[k] - fy[i].value()[k]);
        expected += s / static_cast<double>(fx[i].value().numel());
    }
    expected /= 3;
    CHECK(perceptual_loss(x, y, &bb).item() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("feature matching examples") {
    Rng rng(73);
    const std::vector<ag::Var> f{ag::Var(testing::random_tensor({1, 2, 3, 3}, rng)),
                                 ag::Var(testing::random_tensor({1, 4, 2, 2}, rng))};
    CHECK(feature_matching_loss(f, f).item() == 0.0);
    CHECK(feature_matching_loss({var({2, 5, 3, 1}, 1.0)}, {var({2, 5, 3, 1}, 0.0)}).item() == doctest::Approx(1.0));
    const std::vector<ag::Var> g{ag::Var(testing::random_tensor({1, 2, 3, 3}, rng)),
                                 ag::Var(testing::random_tensor({1, 4, 2, 2}, rng))};
    std::vector<ag::Var> f2, g2;
    for (const auto& v : f) f2.push_back(ag::scale(v, 2.0));
    for (const auto& v : g) g2.push_back(ag::scale(v, 2.0));
    CHECK(feature_matching_loss(f2, g2).item() == doctest::Approx(2 * feature_matching_loss(f, g).item()));
    CHECK_THROWS_AS(feature_matching_loss(f, {f[0]}), DimensionError);
}

TEST_CASE("feature matching treats real features as constants") {
    ag::Var real(Tensor({1, 1, 2, 2}, 1.0), true), fake(Tensor({1, 1, 2, 2}, 0.0), true);
    ag::backward(feature_matching_loss({real}, {fake}));
    CHECK(real.grad().empty());
    CHECK_FALSE(fake.grad().empty());
}

TEST_CASE("hinge losses") {
    CHECK(hinge_d_loss({var({1, 1, 2, 2}, 1.5)}, {var({1, 1, 2, 2}, -1.0)}).item() == 0.0);
    CHECK(hinge_d_loss({scalar(0.0)}, {scalar(0.0)}).item() == doctest::Approx(2.0));
    // Two scales are summed.
    CHECK(hinge_d_loss({scalar(0.0), scalar(0.0)}, {scalar(0.0), scalar(0.0)}).item() == doctest::Approx(4.0));
    Rng rng(74);
    for (int i = 0; i < 20; ++i) {
        CHECK(hinge_d_loss({ag::Var(testing::random_tensor({1, 1, 3, 3}, rng, -3, 3))},
                           {ag::Var(testing::random_tensor({1, 1, 3, 3}, rng, -3, 3))})
                  .item() >= 0.0);
    }
    CHECK(hinge_g_loss({var({1, 1, 2, 2}, 0.0)}).item() == 0.0);
    CHECK(hinge_g_loss({scalar(3.0)}).item() == doctest::Approx(-3.0));
    CHECK_THROWS_AS(hinge_d_loss({scalar(0)}, {}), DimensionError);
    CHECK_THROWS_AS(hinge_g_loss({}), DimensionError);
}

TEST_CASE("hinge_g_loss decreases in every fake logit") {
    Rng rng(75);
    const Tensor base = testing::random_tensor({1, 1, 3, 3}, rng);
    const double l0 = hinge_g_loss({ag::Var(base)}).item();
    for (std::size_t i = 0; i < base.numel(); ++i) {
        Tensor bumped = base;
        bumped[i] += 1e-3;
        CHECK(hinge_g_loss({ag::Var(bumped)}).item() < l0);
    }
}

TEST_CASE("hinge_d_loss saturates above the margin") {
    Rng rng(76);
    Tensor real = testing::random_tensor({1, 1, 3, 3}, rng, -2, 2);
    real[0] = 1.5;
    real[4] = 3.0;
    ag::Var r(real, true);
    const ag::Var f(testing::random_tensor({1, 1, 3, 3}, rng, -2, 2));
    ag::backward(hinge_d_loss({r}, {f}));
    CHECK(r.grad()[0] == 0.0);
    CHECK(r.grad()[4] == 0.0);
    CHECK(testing::gradient_check(r, [&] { return hinge_d_loss({r}, {f}); }) < 1e-6);
}

TEST_CASE("total loss arithmetic") {
    GeneratorLossParts zero{scalar(0), {scalar(0), scalar(0)}, {scalar(0), scalar(0)}};
    CHECK(total_g_loss(zero, {}).item() == 0.0);
    GeneratorLossParts p{scalar(1), {scalar(1), scalar(1)}, {scalar(0), scalar(0)}};
    CHECK(total_g_loss(p, {10, 10}).item() == doctest::Approx(30.0));
    GeneratorLossParts q{scalar(2), {scalar(3), scalar(4)}, {scalar(-1.5), scalar(0.25)}};
    CHECK(total_g_loss(q, {0, 0}).item() == doctest::Approx(-1.25));
    // Linear in each component.
    const double base = total_g_loss(q, {10, 10}).item();
    GeneratorLossParts q2{scalar(3), {scalar(3), scalar(4)}, {scalar(-1.5), scalar(0.25)}};
    CHECK(total_g_loss(q2, {10, 10}).item() - base == doctest::Approx(10.0));
    GeneratorLossParts q3{scalar(2), {scalar(3), scalar(5)}, {scalar(-1.5), scalar(0.25)}};
    CHECK(total_g_loss(q3, {10, 10}).item() - base == doctest::Approx(10.0));
    CHECK_THROWS_AS(total_g_loss(q, {-1, 10}), ParameterError);
}

TEST_CASE("loss gradients match finite differences") {
    Rng rng(77);
    const ConvBackbone bb(5, {3, 4});
    ag::Var x(testing::random_tensor({1, 3, 4, 4}, rng), true);
    const ag::Var y(testing::random_tensor({1, 3, 4, 4}, rng));
    CHECK(testing::gradient_check(x, [&] { return perceptual_loss(x, y, &bb); }) < 1e-4);
    ag::Var f1(testing::random_tensor({1, 2, 3, 3}, rng), true), f2(testing::random_tensor({1, 3, 2, 2}, rng), true);
    const std::vector<ag::Var> real{ag::Var(testing::random_tensor({1, 2, 3, 3}, rng)),
                                    ag::Var(testing::random_tensor({1, 3, 2, 2}, rng))};
    const auto fm = [&] { return feature_matching_loss(real, {f1, f2}); };
    CHECK(testing::gradient_check(f1, fm) < 1e-4);
    CHECK(testing::gradient_check(f2, fm) < 1e-4);
    ag::Var fake(testing::random_tensor({1, 1, 3, 3}, rng, -2, 2), true);
    const ag::Var rl(testing::random_tensor({1, 1, 3, 3}, rng, -2, 2));
    CHECK(testing::gradient_check(fake, [&] { return hinge_d_loss({rl}, {fake}); }) < 1e-4);
    CHECK(testing::gradient_check(fake, [&] { return hinge_g_loss({fake}); }) < 1e-4);
}

TEST_CASE("all losses finite for finite inputs") {
    Rng rng(78);
    const ConvBackbone bb(7);
    const ag::Var x(testing::random_tensor({2, 3, 16, 16}, rng, -1e3, 1e3)), y(testing::random_tensor({2, 3, 16, 16}, rng));
    CHECK(std::isfinite(perceptual_loss(x, y, &bb).item()));
    CHECK(std::isfinite(hinge_d_loss({x}, {y}).item()));
    CHECK(std::isfinite(hinge_g_loss({x}).item()));
}

TEST_CASE("backbones") {
    const ConvBackbone a(7), b(7), c(8);
    CHECK(a.num_layers() == 5);
    CHECK(a.name() == "random:7");
    Rng rng(79);
    const ag::Var x(testing::random_tensor({1, 3, 32, 32}, rng));
    CHECK(max_abs_diff(a.features(x)[2].value(), b.features(x)[2].value()) == 0.0);
    CHECK(max_abs_diff(a.features(x)[0].value(), c.features(x)[0].value()) > 0.0);
    const auto dir = testing::scratch_dir("backbone");
    a.save(dir / "bb.bin");
    const ConvBackbone loaded = ConvBackbone::load(dir / "bb.bin");
    CHECK(loaded.num_layers() == 5);
    CHECK(max_abs_diff(a.features(x)[4].value(), loaded.features(x)[4].value()) == 0.0);
    CHECK(make_backbone("identity")->name() == "identity");
    CHECK(make_backbone("random:3")->name() == "random:3");
    CHECK(make_backbone((dir / "bb.bin").string())->num_layers() == 5);
    CHECK_THROWS_AS(make_backbone("/no/such/file"), ConfigurationError);
    // Frozen weights never accumulate gradients.
    ag::Var xi(testing::random_tensor({1, 3, 8, 8}, rng), true);
    ag::backward(ag::mean(a.features(xi)[1]));
    CHECK_FALSE(xi.grad().empty());
}
