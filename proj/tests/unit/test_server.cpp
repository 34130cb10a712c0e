// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>

#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "rucgan/dataio.hpp"
#include "rucgan/error.hpp"
#include "rucgan/server.hpp"
#include "rucgan/trainer.hpp"
#include "support.hpp"

using namespace rucgan;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kLabels = 4;
constexpr int kSize = 64;

std::shared_ptr<const Generator> tiny_generator() {
    GeneratorConfig c;
    c.height = kSize;
    c.width = kSize;
    c.num_labels = kLabels;
    c.stage_channels = {8, 8, 4};
    c.pnorm.hidden_channels = 4;
    auto g = std::make_shared<Generator>(c, 17);
    // Noise scales start at zero; open them so the seed matters.
    for (auto& blk : g->blocks)
        for (auto* n : {&blk.norm1, &blk.norm2, &blk.norm3}) n->noise_scale.mutable_value().fill(0.5);
    return g;
}

StudioService& service() {
    static StudioService svc(ServiceOptions{}, tiny_generator(), "tiny@test");
    return svc;
}

SegmentationMask quadrant_mask(int size, int s) {
    SegmentationMask m(size, size, s);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) m.set(y, x, (y < size / 2 ? 0 : 2) + (x < size / 2 ? 0 : 1));
    return m;
}

std::string b64(const Bytes& b) { return base64_encode(b); }

json palette_json(int n) {
    json p = json::array();
    for (int l = 0; l < n; ++l) p.push_back({(l * 60) % 256, 255 - l * 40, 30 + l});
    return p;
}

json synth_request() {
    return {{"mask", b64(encode_mask_png(quadrant_mask(kSize, kLabels)))}, {"palette", palette_json(kLabels)},
            {"seed", 99}};
}

struct ConstantSegmenter final : Segmenter {
    int label;
    explicit ConstantSegmenter(int l) : label(l) {}
    SegmentationMask segment(const Tensor& image, int) const override {
        return SegmentationMask(image.dim(1), image.dim(2), label + 1, label);
    }
    std::string name() const override { return "constant"; }
};

struct ThrowingSegmenter final : Segmenter {
    SegmentationMask segment(const Tensor&, int) const override { throw Error("model crashed"); }
    std::string name() const override { return "throwing"; }
};

}  // namespace

TEST_CASE("base64 round trip") {
    Rng rng(1);
    for (int n : {0, 1, 2, 3, 4, 5, 100, 257}) {
        Bytes b(static_cast<std::size_t>(n));
        for (auto& x : b) x = static_cast<std::uint8_t>(rng() & 0xFF);
        CHECK(base64_decode(base64_encode(b)) == b);
    }
    CHECK(base64_encode(Bytes{'M', 'a', 'n'}) == "TWFu");
    CHECK(base64_encode(Bytes{'M', 'a'}) == "TWE=");
    CHECK(base64_decode("data:image/png;base64,TWFu") == Bytes{'M', 'a', 'n'});
    CHECK_THROWS_AS(base64_decode("not*base64"), FormatError);
}

TEST_CASE("inference queue runs jobs in submission order") {
    InferenceQueue q;
    std::vector<int> order;
    std::vector<std::future<int>> futs;
    for (int i = 0; i < 8; ++i) futs.push_back(q.submit([i, &order] {
        order.push_back(i);
        return i * i;
    }));
    for (int i = 0; i < 8; ++i) CHECK(futs[static_cast<std::size_t>(i)].get() == i * i);
    CHECK(order == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(q.jobs_completed() == 8);
    auto bad = q.submit([]() -> int { throw Error("boom"); });
    CHECK_THROWS_AS(bad.get(), Error);
}

TEST_CASE("synthesize returns a decodable image of the model size") {
    const ApiResponse r = service().synthesize(synth_request());
    REQUIRE(r.status == 200);
    const Tensor img = decode_image_png(base64_decode(r.body["image"].get<std::string>()));
    CHECK(img.shape() == Shape{3, kSize, kSize});
    CHECK(r.body["latency_ms"].get<double>() >= 0.0);
    CHECK(r.body["seed"] == 99);

    const ApiResponse again = service().synthesize(synth_request());
    CHECK(again.body["image"] == r.body["image"]);

    json other = synth_request();
    other["seed"] = 100;
    CHECK(service().synthesize(other).body["image"] != r.body["image"]);

    json sized = synth_request();
    sized["size"] = 32;
    const ApiResponse small = service().synthesize(sized);
    REQUIRE(small.status == 200);
    CHECK(decode_image_png(base64_decode(small.body["image"].get<std::string>())).shape() == Shape{3, 32, 32});

    json larger_mask = synth_request();
    larger_mask["mask"] = b64(encode_mask_png(quadrant_mask(128, kLabels)));
    CHECK(service().synthesize(larger_mask).status == 200);
}

TEST_CASE("concurrent identical requests agree and leave the model untouched") {
    auto gen = tiny_generator();
    const auto before = hash_parameters(gen->parameters());
    StudioService svc(ServiceOptions{}, gen, "tiny@test");
    std::vector<std::string> images(4);
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < images.size(); ++i)
        threads.emplace_back([&, i] { images[i] = svc.synthesize(synth_request()).body["image"].get<std::string>(); });
    for (auto& t : threads) t.join();
    for (const auto& img : images) CHECK(img == images[0]);
    CHECK(svc.queue().jobs_completed() == images.size());
    CHECK(hash_parameters(gen->parameters()) == before);
}

TEST_CASE("synthesize validates its inputs") {
    json short_palette = synth_request();
    short_palette["palette"] = palette_json(kLabels - 1);
    ApiResponse r = service().synthesize(short_palette);
    CHECK(r.status == 400);
    CHECK(r.body["field"] == "palette");

    json out_of_range = synth_request();
    out_of_range["palette"][1] = {0, 256, 0};
    CHECK(service().synthesize(out_of_range).status == 400);

    json not_triple = synth_request();
    not_triple["palette"][0] = {1, 2};
    CHECK(service().synthesize(not_triple).body["field"] == "palette");

    json bad_label = synth_request();
    bad_label["mask"] = b64(encode_mask_png(SegmentationMask(kSize, kSize, 9, 7)));
    r = service().synthesize(bad_label);
    CHECK(r.status == 422);
    CHECK(r.body["field"] == "mask");

    json garbage = synth_request();
    garbage["mask"] = b64(Bytes{1, 2, 3, 4});
    CHECK(service().synthesize(garbage).status == 400);

    json neg_seed = synth_request();
    neg_seed["seed"] = -3;
    CHECK(service().synthesize(neg_seed).body["field"] == "seed");
    json bad_size = synth_request();
    bad_size["size"] = 4;
    CHECK(service().synthesize(bad_size).body["field"] == "size");
    json missing = synth_request();
    missing.erase("palette");
    CHECK(service().synthesize(missing).status == 400);
}

TEST_CASE("synthesize without a model is a conflict") {
    ServiceOptions opt;
    opt.num_labels = kLabels;
    opt.image_size = kSize;
    StudioService svc(opt);
    CHECK_FALSE(svc.has_model());
    CHECK(svc.synthesize(synth_request()).status == 409);
    const json h = svc.health().body;
    CHECK(h["status"] == "no_model");
    CHECK(h["checkpoint_id"].is_null());
    CHECK_THROWS_AS(StudioService(ServiceOptions{}), ConfigurationError);
}

TEST_CASE("palette extraction") {
    SegmentationMask mask(4, 4, kLabels);
    Tensor image({3, 4, 4});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const bool right = x >= 2;
            mask.set(y, x, right ? 3 : 1);
            for (int c = 0; c < 3; ++c) image.at(c, y, x) = right ? (c == 0 ? 1.0 : -1.0) : (c == 2 ? 1.0 : -1.0);
        }
    const ApiResponse r = service().extract_palette(
        {{"image", b64(encode_image_png(image))}, {"mask", b64(encode_mask_png(mask))}});
    REQUIRE(r.status == 200);
    CHECK(r.body["palette"][1] == json{0, 0, 255});
    CHECK(r.body["palette"][3] == json{255, 0, 0});
    CHECK(r.body["present"] == json{false, true, false, true});

    Rng rng(6);
    const Tensor rnd = testing::random_tensor({3, 16, 16}, rng);
    const SegmentationMask rmask = testing::random_mask(16, 16, kLabels, rng);
    const Bytes png = encode_image_png(rnd);
    const ApiResponse rr = service().extract_palette({{"image", b64(png)}, {"mask", b64(encode_mask_png(rmask))}});
    REQUIRE(rr.status == 200);
    const PaletteVector local = extract_palette(decode_image_png(png), rmask);
    for (int l = 0; l < kLabels; ++l) {
        const Rgb8 want = unit_to_bank(local.colors[static_cast<std::size_t>(l)]);
        CHECK(rr.body["palette"][l] == json{want[0], want[1], want[2]});
    }

    const ApiResponse mismatch = service().extract_palette(
        {{"image", b64(encode_image_png(image))}, {"mask", b64(encode_mask_png(SegmentationMask(5, 4, kLabels)))}});
    CHECK(mismatch.status == 400);
}

TEST_CASE("segmentation plugin handling") {
    Rng rng(2);
    const json req = {{"image", b64(encode_image_png(testing::random_tensor({3, 8, 8}, rng)))}};
    CHECK(service().segment(req).status == 501);

    ServiceOptions ok;
    ok.segmenter = std::make_shared<ConstantSegmenter>(2);
    StudioService with(ok, tiny_generator(), "x");
    const ApiResponse r = with.segment(req);
    REQUIRE(r.status == 200);
    const SegmentationMask m = decode_mask_png(base64_decode(r.body["mask"].get<std::string>()), kLabels);
    CHECK(m == SegmentationMask(8, 8, kLabels, 2));

    ServiceOptions bad;
    bad.segmenter = std::make_shared<ConstantSegmenter>(kLabels);
    CHECK(StudioService(bad, tiny_generator(), "x").segment(req).status == 502);
    ServiceOptions crash;
    crash.segmenter = std::make_shared<ThrowingSegmenter>();
    CHECK(StudioService(crash, tiny_generator(), "x").segment(req).status == 502);
}

TEST_CASE("catalog endpoints") {
    const json bank = service().colorbank().body;
    REQUIRE(bank.is_array());
    CHECK(bank.size() >= 8);
    std::set<std::string> names;
    for (const auto& e : bank) {
        names.insert(e["name"].get<std::string>());
        CHECK(e["rgb"].size() == 3);
    }
    CHECK(names.size() == bank.size());

    const json labels = service().labels().body;
    CHECK(labels.size() == kLabels);
    for (int i = 0; i < kLabels; ++i) CHECK(labels[i]["id"] == i);

    const fs::path dir = testing::scratch_dir("server-labels");
    const std::vector<LabelInfo> table = {{0, "sky", {70, 130, 180}}, {1, "tree", {107, 142, 35}},
                                          {2, "road", {128, 64, 128}}, {3, "car", {0, 0, 142}}};
    save_label_table(dir / "labels.json", table);
    ServiceOptions opt;
    opt.label_table = dir / "labels.json";
    StudioService svc(opt, tiny_generator(), "x");
    const json got = svc.labels().body;
    CHECK(got == json::parse(std::string(reinterpret_cast<const char*>(read_file(dir / "labels.json").data()),
                                         read_file(dir / "labels.json").size())));
    CHECK(got[3]["name"] == "car");

    ServiceOptions wrong;
    save_label_table(dir / "three.json", {table[0], table[1], table[2]});
    wrong.label_table = dir / "three.json";
    CHECK_THROWS_AS(StudioService(wrong, tiny_generator(), "x"), ConfigurationError);

    const json h = service().health().body;
    CHECK(h["status"] == "ok");
    CHECK(h["checkpoint_id"] == "tiny@test");
    CHECK(h["num_labels"] == kLabels);
    CHECK(h["image_size"] == kSize);
}

TEST_CASE("routing") {
    CHECK(service().handle("GET", "/api/health", "").status == 200);
    CHECK(service().handle("GET", "/api/nope", "").status == 404);
    CHECK(service().handle("POST", "/api/synthesize", "{not json").status == 400);
    CHECK(service().handle("POST", "/api/synthesize", "[1,2]").status == 400);
    CHECK(service().handle("POST", "/api/synthesize", synth_request().dump()).status == 200);
}

TEST_CASE("HTTP round trip with CORS") {
    HttpServer server(service());
    const int port = server.bind_any("127.0.0.1");
    REQUIRE(port > 0);
    std::thread t([&] { server.serve_bound(); });
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(120, 0);
    auto health = cli.Get("/api/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");
    CHECK(json::parse(health->body)["status"] == "ok");

    auto synth = cli.Post("/api/synthesize", synth_request().dump(), "application/json");
    REQUIRE(synth);
    CHECK(synth->status == 200);
    CHECK(json::parse(synth->body)["image"] == service().synthesize(synth_request()).body["image"]);

    auto missing = cli.Get("/api/unknown");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    auto pre = cli.Options("/api/synthesize");
    REQUIRE(pre);
    CHECK(pre->status == 204);
    server.stop();
    t.join();
}
