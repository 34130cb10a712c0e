// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>

#include "rucgan/dataio.hpp"
#include "rucgan/error.hpp"
#include "support.hpp"

using namespace rucgan;
namespace fs = std::filesystem;

TEST_CASE("one_hot examples") {
    Rng rng(81);
    const SegmentationMask m = testing::random_mask(5, 7, 4, rng);
    const Tensor oh = one_hot(m, 4);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 7; ++x) {
            double sum = 0;
            for (int l = 0; l < 4; ++l) sum += oh.at(l, y, x);
            CHECK(sum == 1.0);
        }
    CHECK(argmax_labels(oh) == m);
    const SegmentationMask m3 = testing::random_mask(3, 3, 3, rng);
    const Tensor o3 = one_hot(m3, 3);
    for (int l = 0; l < 3; ++l)
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x) CHECK(o3.at(l, y, x) == (m3.at(y, x) == l ? 1.0 : 0.0));
    CHECK_THROWS_AS(one_hot(m, 3), LabelRangeError);
}

TEST_CASE("property: one_hot after argmax after one_hot is stable") {
    Rng rng(82);
    for (int i = 0; i < 10; ++i) {
        const SegmentationMask m = testing::random_mask(6, 6, 5, rng);
        const Tensor a = one_hot(m, 5);
        CHECK(max_abs_diff(one_hot(argmax_labels(a), 5), a) == 0.0);
    }
}

TEST_CASE("batched one-hot") {
    Rng rng(83);
    std::vector<SegmentationMask> ms{testing::random_mask(4, 4, 3, rng), testing::random_mask(4, 4, 3, rng)};
    const Tensor b = one_hot_batch(ms);
    CHECK(b.shape() == Shape{2, 3, 4, 4});
    CHECK(b.at(1, ms[1].at(2, 3), 2, 3) == 1.0);
    ms.push_back(testing::random_mask(2, 2, 3, rng));
    CHECK_THROWS_AS(one_hot_batch(ms), DimensionError);
}

TEST_CASE("png codecs") {
    Rng rng(84);
    SUBCASE("mask round trip is bitwise") {
        for (int i = 0; i < 5; ++i) {
            const SegmentationMask m = testing::random_mask(13, 9, 19, rng);
            CHECK(decode_mask_png(encode_mask_png(m), 19) == m);
        }
    }
    SUBCASE("mask labels are validated") {
        const SegmentationMask m(4, 4, 8, 7);
        CHECK_THROWS_AS(decode_mask_png(encode_mask_png(m), 5), LabelRangeError);
    }
    SUBCASE("color PNG is not a mask") {
        const Bytes rgb = encode_image_png(testing::random_tensor({3, 4, 4}, rng));
        CHECK_THROWS_AS(decode_mask_png(rgb, 5), FormatError);
    }
    SUBCASE("image round trip within quantization") {
        const Tensor img = testing::random_tensor({3, 6, 5}, rng);
        const Tensor back = decode_image_png(encode_image_png(img));
        CHECK(back.shape() == img.shape());
        CHECK(max_abs_diff(back, img) <= 1.0 / 127.5 + 1e-12);
    }
    SUBCASE("white decodes to ones") {
        const Tensor white({3, 4, 4}, 1.0);
        const Tensor back = decode_image_png(encode_image_png(white));
        for (double v : back.data()) CHECK(v == 1.0);
    }
    SUBCASE("garbage is rejected") {
        const Bytes junk{1, 2, 3, 4, 5};
        CHECK_THROWS_AS(decode_image_png(junk), FormatError);
        CHECK_THROWS_AS(decode_mask_png(junk, 3), FormatError);
    }
}

TEST_CASE("resizing policy") {
    Rng rng(85);
    CHECK(resize_nearest(SegmentationMask(5, 7, 4, 2), 16, 16) == SegmentationMask(16, 16, 4, 2));
    const SegmentationMask m = testing::random_mask(9, 11, 6, rng);
    const auto present = m.present_labels();
    for (auto [h, w] : {std::pair{4, 4}, std::pair{20, 30}, std::pair{9, 11}}) {
        const SegmentationMask r = resize_nearest(m, h, w);
        for (int l : r.present_labels()) CHECK(std::find(present.begin(), present.end(), l) != present.end());
    }
    CHECK(resize_nearest(m, 9, 11) == m);
    const Tensor img = testing::random_tensor({3, 8, 8}, rng);
    CHECK(max_abs_diff(resize_bilinear(img, 8, 8), img) < 1e-12);
    const Tensor flat({3, 5, 5}, 0.25);
    const Tensor stretched = resize_bilinear(flat, 17, 3);
    for (double v : stretched.data()) CHECK(v == doctest::Approx(0.25));
    // Half-pixel centers: 2x downsampling averages 2x2 blocks.
    const Tensor down = resize_bilinear(img, 4, 4);
    CHECK(down.at(1, 2, 3) == doctest::Approx((img.at(1, 4, 6) + img.at(1, 4, 7) + img.at(1, 5, 6) + img.at(1, 5, 7)) / 4));
}

TEST_CASE("manifest loading") {
    const fs::path dir = testing::scratch_dir("manifest");
    const fs::path manifest = write_toy_dataset(dir, 3, 32, 4, 5);
    const DatasetManifest mf = load_manifest(manifest, 4, 32);
    CHECK(mf.records.size() == 3);
    const auto data = load_dataset(mf);
    REQUIRE(data.size() == 3);
    CHECK(data[0].image.shape() == Shape{3, 32, 32});
    CHECK(data[0].mask.num_labels() == 4);
    // Resized on load.
    const Sample small = load_sample(mf.records[1], 16, 4);
    CHECK(small.image.shape() == Shape{3, 16, 16});
    CHECK(small.mask.height() == 16);

    std::ofstream(dir / "bad.jsonl") << "{\"image\": \"images/none.png\", \"mask\": \"masks/none.png\"}\n";
    CHECK_THROWS_AS(load_manifest(dir / "bad.jsonl", 4, 32), FormatError);
    std::ofstream(dir / "garbage.jsonl") << "not json\n";
    CHECK_THROWS_AS(load_manifest(dir / "garbage.jsonl", 4, 32), FormatError);
    CHECK_THROWS_AS(load_manifest(dir / "missing.jsonl", 4, 32), FormatError);
    // Labels beyond s fail on load.
    CHECK_THROWS_AS(load_sample(mf.records[0], 32, 2), LabelRangeError);
}

TEST_CASE("label tables") {
    const fs::path dir = testing::scratch_dir("labels");
    const auto table = default_label_table(6);
    CHECK(table.size() == 6);
    std::set<std::string> names;
    for (const auto& l : table) CHECK(names.insert(l.name).second);
    save_label_table(dir / "labels.json", table);
    const auto back = load_label_table(dir / "labels.json");
    REQUIRE(back.size() == 6);
    CHECK(back[3].name == table[3].name);
    CHECK(back[3].color == table[3].color);
}

TEST_CASE("toy samples are deterministic and use several labels") {
    Rng a(9), b(9);
    const auto x = make_toy_samples(3, 32, 4, a);
    const auto y = make_toy_samples(3, 32, 4, b);
    for (int i = 0; i < 3; ++i) {
        CHECK(max_abs_diff(x[i].image, y[i].image) == 0.0);
        CHECK(x[i].mask == y[i].mask);
        CHECK(x[i].mask.present_labels().size() >= 2);
        for (double v : x[i].image.data()) CHECK((v >= -1.0 && v <= 1.0));
    }
}
