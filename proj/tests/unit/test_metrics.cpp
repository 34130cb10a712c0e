// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "rucgan/dataio.hpp"
#include "rucgan/error.hpp"
#include "rucgan/metrics.hpp"
#include "support.hpp"

using namespace rucgan;
namespace fs = std::filesystem;

namespace {

Tensor image_from_pixels(int h, int w, const std::vector<Rgb>& px) {
    Tensor t({3, h, w});
    for (int i = 0; i < h * w; ++i) {
        for (int c = 0; c < 3; ++c) t[static_cast<std::size_t>(c) * h * w + i] = px[i][c];
    }
    return t;
}

Tensor scaled(const Tensor& t, double k) {
    Tensor out = t;
    for (double& v : out.data()) v *= k;
    return out;
}

EmbeddingSet gaussian_set(int n, int d, double shift, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(n) * d);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = nd(gen) + (i % d == 0 ? shift : 0.0);
    return EmbeddingSet(n, d, std::move(v));
}

struct MeanAbsScorer final : ExternalScorer {
    double score(const Tensor& x, const Tensor& y) const override { return max_abs_diff(x, y); }
    std::string provenance() const override { return "stub:maxabs"; }
};

struct ConstantSegmenter final : Segmenter {
    int label;
    explicit ConstantSegmenter(int l) : label(l) {}
    SegmentationMask segment(const Tensor& image, int s) const override {
        return SegmentationMask(image.shape()[1], image.shape()[2], s, label);
    }
    std::string name() const override { return "stub:constant"; }
};

}  // namespace

TEST_CASE("style relevance with the identity backbone") {
    const IdentityBackbone id;
    Rng rng(5);
    const Tensor a = testing::random_tensor({3, 6, 5}, rng);
    CHECK(style_relevance(a, a, &id) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(style_relevance(a, scaled(a, -1.0), &id) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(style_relevance(a, scaled(a, 3.0), &id) == doctest::Approx(1.0).epsilon(1e-12));

    // Two pixels: one aligned (cos 1), one orthogonal (cos 0).
    const Tensor s = image_from_pixels(1, 2, {{1, 0, 0}, {0, 1, 0}});
    const Tensor g = image_from_pixels(1, 2, {{2, 0, 0}, {1, 0, 0}});
    CHECK(style_relevance(s, g, &id) == doctest::Approx(0.5).epsilon(1e-12));

    // Zero-vector conventions.
    const Tensor z = image_from_pixels(1, 2, {{0, 0, 0}, {0, 0, 0}});
    const Tensor m = image_from_pixels(1, 2, {{0, 0, 0}, {1, 1, 1}});
    CHECK(style_relevance(z, z, &id) == doctest::Approx(1.0));
    CHECK(style_relevance(z, m, &id) == doctest::Approx(0.5));

    CHECK_THROWS_AS(style_relevance(a, a, nullptr), ConfigurationError);
    CHECK_THROWS_AS(style_relevance(a, testing::random_tensor({3, 5, 5}, rng), &id), DimensionError);
}

TEST_CASE("style relevance stays in range with a conv backbone") {
    const ConvBackbone bb(7);
    Rng rng(9);
    for (int t = 0; t < 3; ++t) {
        const Tensor a = testing::random_tensor({3, 16, 16}, rng);
        const Tensor b = testing::random_tensor({3, 16, 16}, rng);
        const double v = style_relevance(a, b, &bb);
        CHECK(v <= 1.0 + 1e-12);
        CHECK(v >= -1.0 - 1e-12);
        CHECK(style_relevance(a, a, &bb) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("frechet distance oracles") {
    const EmbeddingSet a = gaussian_set(200, 4, 0.0, 1);
    CHECK(frechet_distance(a, a) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(std::abs(frechet_distance(a, a)) < 1e-6);

    const EmbeddingSet b = gaussian_set(150, 4, 0.7, 2);
    const double ab = frechet_distance(a, b), ba = frechet_distance(b, a);
    CHECK(std::abs(ab - ba) < 1e-8);
    CHECK(ab >= 0.0);

    // b = c·a + t shares eigenvectors with a, so the trace term is (1-c)² tr Σa.
    const double c = 1.8;
    std::vector<double> shifted(a.values());
    std::vector<double> t = {0.5, -1.0, 2.0, 0.0};
    for (int i = 0; i < a.size(); ++i)
        for (int j = 0; j < a.dim(); ++j) shifted[static_cast<std::size_t>(i) * 4 + j] = c * a.at(i, j) + t[j];
    const EmbeddingSet sc(a.size(), 4, shifted);
    double tr = 0.0, dmu = 0.0;
    for (int j = 0; j < 4; ++j) {
        double mean = 0.0, var = 0.0;
        for (int i = 0; i < a.size(); ++i) mean += a.at(i, j);
        mean /= a.size();
        for (int i = 0; i < a.size(); ++i) var += (a.at(i, j) - mean) * (a.at(i, j) - mean);
        tr += var / (a.size() - 1);
        const double dm = (c - 1.0) * mean + t[j];
        dmu += dm * dm;
    }
    CHECK(frechet_distance(a, sc) == doctest::Approx(dmu + (1 - c) * (1 - c) * tr).epsilon(1e-8));

    // One dimension: (μa-μb)² + (σa-σb)².
    const EmbeddingSet x(4, 1, {0, 1, 2, 3}), y(3, 1, {1, 3, 5});
    const double va = 5.0 / 3.0, vb = 4.0;
    CHECK(frechet_distance(x, y) ==
          doctest::Approx(1.5 * 1.5 + (std::sqrt(va) - std::sqrt(vb)) * (std::sqrt(va) - std::sqrt(vb))).epsilon(1e-10));
}

TEST_CASE("frechet distance Gaussian anchor") {
    const EmbeddingSet a = gaussian_set(20000, 8, 0.0, 11);
    const EmbeddingSet b = gaussian_set(20000, 8, 2.0, 12);
    CHECK(frechet_distance(a, b) == doctest::Approx(4.0).epsilon(0.025));
}

TEST_CASE("embedding set validation") {
    CHECK_THROWS_AS(EmbeddingSet(1, 2, {1, 2}), DimensionError);
    CHECK_THROWS_AS(EmbeddingSet(2, 0, {}), DimensionError);
    CHECK_THROWS_AS(EmbeddingSet(2, 2, {1, 2, 3}), DimensionError);
    CHECK_THROWS_AS(frechet_distance(EmbeddingSet(2, 2, {1, 2, 3, 4}), EmbeddingSet(2, 1, {1, 2})), DimensionError);
}

TEST_CASE("backbone embedder") {
    auto bb = std::make_shared<ConvBackbone>(7, std::vector<int>{4, 4});
    const BackboneEmbedder emb(bb);
    Rng rng(2);
    const std::vector<Tensor> imgs = {testing::random_tensor({3, 8, 8}, rng), testing::random_tensor({3, 8, 8}, rng),
                                      testing::random_tensor({3, 8, 8}, rng)};
    const EmbeddingSet set = embed_images(imgs, emb);
    CHECK(set.size() == 3);
    CHECK(set.dim() == 8);
    CHECK(emb.name() == "pooled:" + bb->name());
    CHECK(emb.embed(imgs[1]) == emb.embed(imgs[1]));
}

TEST_CASE("confusion matrix examples") {
    const SegmentationMask gt(2, 2, 2, std::vector<std::int32_t>{0, 0, 1, 1});
    const SegmentationMask pred(2, 2, 2, std::vector<std::int32_t>{0, 1, 1, 1});
    ConfusionMatrix cm(2);
    cm.add(pred, gt);
    CHECK(cm.count(0, 1) == 1);
    CHECK(cm.count(1, 1) == 2);
    CHECK(cm.mean_iou() == doctest::Approx((0.5 + 2.0 / 3.0) / 2));
    CHECK(cm.pixel_accuracy() == doctest::Approx(0.75));

    // A label absent from both masks is ignored.
    const SegmentationMask gt3(2, 2, 3, std::vector<std::int32_t>{0, 0, 1, 1});
    const SegmentationMask pred3(2, 2, 3, std::vector<std::int32_t>{0, 1, 1, 1});
    const auto s3 = segmentation_scores(std::vector{pred3}, std::vector{gt3}, 3);
    CHECK(s3.miou == doctest::Approx(cm.mean_iou()));

    // All wrong: one label predicted everywhere, the other is the truth.
    const SegmentationMask ones(2, 2, 2, 1), zeros(2, 2, 2, 0);
    const auto wrong = segmentation_scores(std::vector{ones}, std::vector{zeros}, 2);
    CHECK(wrong.miou == 0.0);
    CHECK(wrong.accuracy == 0.0);
    CHECK(ConfusionMatrix(2).mean_iou() == 0.0);

    CHECK_THROWS_AS(cm.add(SegmentationMask(3, 2, 2), gt), DimensionError);
    CHECK_THROWS_AS(cm.add(SegmentationMask(2, 2, 3, 2), gt), LabelRangeError);
}

TEST_CASE("mIoU is invariant under consistent relabeling and merge equals joint accumulation") {
    Rng rng(4);
    const int s = 5;
    std::vector<int> perm = {3, 0, 4, 1, 2};
    const auto relabel = [&](const SegmentationMask& m) {
        std::vector<std::int32_t> v(m.labels().begin(), m.labels().end());
        for (auto& l : v) l = perm[static_cast<std::size_t>(l)];
        return SegmentationMask(m.height(), m.width(), s, v);
    };
    for (int t = 0; t < 20; ++t) {
        const auto gt = testing::random_mask(6, 7, s, rng), pred = testing::random_mask(6, 7, s, rng);
        const auto gt2 = testing::random_mask(6, 7, s, rng), pred2 = testing::random_mask(6, 7, s, rng);
        ConfusionMatrix a(s), b(s), joint(s), perm_cm(s);
        a.add(pred, gt);
        b.add(pred2, gt2);
        joint.add(pred, gt);
        joint.add(pred2, gt2);
        a.merge(b);
        CHECK(a.mean_iou() == doctest::Approx(joint.mean_iou()).epsilon(1e-14));
        CHECK(a.total() == 84);
        perm_cm.add(relabel(pred), relabel(gt));
        perm_cm.add(relabel(pred2), relabel(gt2));
        CHECK(perm_cm.mean_iou() == doctest::Approx(joint.mean_iou()).epsilon(1e-12));
        CHECK(perm_cm.pixel_accuracy() == doctest::Approx(joint.pixel_accuracy()).epsilon(1e-12));
        const double m = joint.mean_iou();
        CHECK((m >= 0.0 && m <= 1.0));
    }
}

TEST_CASE("LPIPS adapter") {
    Rng rng(1);
    const Tensor x = testing::random_tensor({3, 4, 4}, rng), y = testing::random_tensor({3, 4, 4}, rng);
    const MeanAbsScorer stub;
    const ScorerResult r = lpips_adapter(x, y, &stub);
    REQUIRE(r.value.has_value());
    CHECK(*r.value == max_abs_diff(x, y));
    CHECK(r.provenance == "stub:maxabs");

    const ScorerResult none = lpips_adapter(x, y, nullptr);
    CHECK_FALSE(none.value.has_value());
    CHECK(none.provenance == "none");
    CHECK_FALSE(none.reason.empty());
}

TEST_CASE("command scorer and segmenter plugins") {
    const fs::path dir = testing::scratch_dir("metrics-cmd");
    std::ofstream(dir / "score.sh") << "#!/bin/sh\ntest -f \"$1\" && test -f \"$2\" && echo 0.125\n";
    fs::permissions(dir / "score.sh", fs::perms::owner_all);
    const CommandScorer scorer((dir / "score.sh").string());
    Rng rng(1);
    const Tensor x = testing::random_tensor({3, 4, 4}, rng);
    CHECK(scorer.score(x, x) == 0.125);
    CHECK(lpips_adapter(x, x, &scorer).value == 0.125);

    const CommandScorer failing("false");
    const ScorerResult r = lpips_adapter(x, x, &failing);
    CHECK_FALSE(r.value.has_value());
    CHECK_THROWS_AS(CommandScorer(""), ConfigurationError);

    const SegmentationMask want(4, 4, 3, std::vector<std::int32_t>{0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2, 0});
    write_mask_png(dir / "fixed.png", want);
    std::ofstream(dir / "seg.sh") << "#!/bin/sh\ncp " << (dir / "fixed.png").string() << " \"$2\"\n";
    fs::permissions(dir / "seg.sh", fs::perms::owner_all);
    const CommandSegmenter seg((dir / "seg.sh").string());
    CHECK(seg.segment(x, 3) == want);
    CHECK_THROWS_AS(seg.segment(x, 2), LabelRangeError);
}

TEST_CASE("evaluation report") {
    Rng rng(8);
    const auto samples = make_toy_samples(3, 16, 3, rng);
    std::vector<Tensor> images;
    std::vector<SegmentationMask> masks;
    for (const auto& s : samples) {
        images.push_back(s.image);
        masks.push_back(s.mask);
    }
    auto bb = std::make_shared<ConvBackbone>(7, std::vector<int>{4, 4});
    const BackboneEmbedder emb(bb);
    const MeanAbsScorer lp;
    const ConstantSegmenter seg(0);

    std::size_t next = 0;
    const Synthesizer copy = [&](const SegmentationMask&, const PaletteVector&) { return images[next++]; };
    const EvaluationReport perfect = evaluate(images, masks, copy, {bb, &emb, &lp, &seg});
    CHECK(*perfect.sr == doctest::Approx(1.0));
    CHECK(std::abs(*perfect.fid) < 1e-6);
    CHECK(*perfect.lpips == 0.0);
    REQUIRE(perfect.miou.has_value());
    CHECK(*perfect.acc >= 0.0);

    const Synthesizer painter = [](const SegmentationMask& m, const PaletteVector& p) { return paint_by_palette(p, m); };
    const EvaluationReport partial = evaluate(images, masks, painter, {bb, nullptr, nullptr, nullptr});
    const nlohmann::json j = partial.to_json();
    for (const char* key : {"fid", "lpips", "sr", "miou", "acc", "n_images", "scorer_provenance"}) CHECK(j.contains(key));
    CHECK(j["lpips"] == "unavailable");
    CHECK(j["fid"] == "unavailable");
    CHECK(j["miou"] == "unavailable");
    CHECK(j["sr"].is_number());
    CHECK(j["n_images"] == 3);
    CHECK(j["scorer_provenance"]["lpips"].get<std::string>().find("unavailable") == 0);

    CHECK_THROWS_AS(evaluate(images, std::span(masks).first(2), painter, {bb}), DimensionError);
}
