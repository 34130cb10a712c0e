// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// rucgan: train, synthesize, extract-palette, evaluate, serve.
// Exit codes: 0 success, 2 usage or validation error, 1 runtime failure.

#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rucgan/dataio.hpp"
#include "rucgan/error.hpp"
#include "rucgan/kernels.hpp"
#include "rucgan/metrics.hpp"
#include "rucgan/server.hpp"
#include "rucgan/trainer.hpp"

namespace fs = std::filesystem;
using namespace rucgan;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 1;

void print_section(const std::string& title, const nlohmann::json& j) {
    std::cout << "[" << title << "]\n" << j.dump(2) << "\n";
}

void require_file(const std::string& path, const std::string& what) {
    if (!fs::is_regular_file(path)) {
        throw ConfigurationError(what + " not found: " + path);
    }
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::string resume;
    std::optional<std::uint64_t> seed;
    std::optional<long> max_steps;
    std::string output_dir;
};

int cmd_train(const TrainArgs& a) {
    require_file(a.config, "config file");
    TrainConfig cfg = parse_train_config(a.config);
    if (a.seed) {
        cfg.seed = *a.seed;
    }
    if (a.max_steps) {
        cfg.max_steps = *a.max_steps;
    }
    if (!a.output_dir.empty()) {
        cfg.output_dir = a.output_dir;
    }
    cfg.validate();
    if (cfg.manifest.empty()) {
        throw ConfigurationError("config does not name a manifest");
    }
    std::unique_ptr<TrainState> state;
    if (!a.resume.empty()) {
        require_file(a.resume, "checkpoint");
        state = load_checkpoint(a.resume, &cfg);
    } else {
        state = TrainState::create(cfg, nullptr);
    }
    print_section("resolved config", to_json(state->config));
    std::cout << "generator parameters: " << state->generator.parameter_count()
              << "\ndiscriminator parameters: " << state->discriminator.parameter_count()
              << "\nthreads: " << kernels::max_threads() << "\n";

    const DatasetManifest manifest = load_manifest(cfg.manifest, cfg.num_labels, cfg.image_size);
    const std::vector<Sample> data = load_dataset(manifest);
    std::cout << "samples: " << data.size() << "\n" << std::flush;

    const fs::path out = state->config.output_dir;
    fs::create_directories(out);
    std::ofstream log(out / "train_log.jsonl", a.resume.empty() ? std::ios::trunc : std::ios::app);
    const double l1_before = reconstruction_l1(state->generator, data);
    run_training(*state, data, &log, out / "checkpoints");
    const double l1_after = reconstruction_l1(state->generator, data);
    std::cout << "reconstruction L1: " << l1_before << " -> " << l1_after << "\n"
              << "checkpoint: " << (out / "checkpoints" / "final.ckpt").string() << "\n";
    return 0;
}

// ---- synthesize ------------------------------------------------------------

struct SynthArgs {
    std::string ckpt, mask, palette, out;
    std::uint64_t seed = kDefaultSeed;
};

int cmd_synthesize(const SynthArgs& a) {
    require_file(a.ckpt, "checkpoint");
    require_file(a.mask, "mask");
    require_file(a.palette, "palette");
    const Generator g = load_generator(a.ckpt);
    const GeneratorConfig& gc = g.config();
    print_section("resolved config", {{"ckpt", a.ckpt},
                                      {"mask", a.mask},
                                      {"palette", a.palette},
                                      {"out", a.out},
                                      {"seed", a.seed},
                                      {"generator", to_json(gc)}});
    SegmentationMask mask = read_mask_png(a.mask, gc.num_labels);
    PaletteVector palette = load_palette(a.palette);
    if (palette.num_labels() != gc.num_labels) {
        throw LabelRangeError("palette has " + std::to_string(palette.num_labels()) + " entries, model expects " +
                              std::to_string(gc.num_labels));
    }
    if (mask.height() != gc.height || mask.width() != gc.width) {
        mask = resize_nearest(mask, gc.height, gc.width);
    }
    std::cout << "palette used:\n";
    for (int l = 0; l < palette.num_labels(); ++l) {
        const Rgb8 c = unit_to_bank(palette.colors[static_cast<std::size_t>(l)]);
        std::cout << "  " << l << ": " << c[0] << " " << c[1] << " " << c[2]
                  << (palette.present[static_cast<std::size_t>(l)] ? "" : " (absent)") << "\n";
    }
    const Tensor image = g.synthesize(mask, palette, a.seed);
    write_image_png(a.out, image);
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

// ---- extract-palette -------------------------------------------------------

struct ExtractArgs {
    std::string image, mask, out;
    int num_labels = 0;
};

int cmd_extract(const ExtractArgs& a) {
    require_file(a.image, "image");
    require_file(a.mask, "mask");
    print_section("resolved config",
                  {{"image", a.image}, {"mask", a.mask}, {"out", a.out}, {"num_labels", a.num_labels}});
    const Tensor image = read_image_png(a.image);
    const SegmentationMask mask = read_mask_png(a.mask, a.num_labels);
    const PaletteVector p = extract_palette(image, mask);
    if (a.out.empty()) {
        std::cout << palette_to_json(p).dump(2) << "\n";
    } else {
        save_palette(p, a.out);
        std::cout << "wrote " << a.out << "\n";
    }
    return 0;
}

// ---- evaluate --------------------------------------------------------------

struct EvalArgs {
    std::string ckpt, manifest, report;
    std::string backbone = "random:7";
    std::string lpips_cmd, segmenter_cmd;
    std::uint64_t seed = kDefaultSeed;
};

int cmd_evaluate(const EvalArgs& a) {
    require_file(a.ckpt, "checkpoint");
    require_file(a.manifest, "manifest");
    const Generator g = load_generator(a.ckpt);
    const GeneratorConfig& gc = g.config();
    print_section("resolved config", {{"ckpt", a.ckpt},
                                      {"manifest", a.manifest},
                                      {"report", a.report},
                                      {"backbone", a.backbone},
                                      {"lpips_cmd", a.lpips_cmd},
                                      {"segmenter_cmd", a.segmenter_cmd},
                                      {"seed", a.seed}});
    const auto manifest = load_manifest(a.manifest, gc.num_labels, gc.height, "test");
    const auto samples = load_dataset(manifest);
    std::vector<Tensor> images;
    std::vector<SegmentationMask> masks;
    for (const auto& s : samples) {
        images.push_back(s.image);
        masks.push_back(s.mask);
    }
    const auto backbone = make_backbone(a.backbone);
    const BackboneEmbedder embedder(backbone);
    std::unique_ptr<CommandScorer> scorer;
    std::unique_ptr<CommandSegmenter> segmenter;
    if (!a.lpips_cmd.empty()) {
        scorer = std::make_unique<CommandScorer>(a.lpips_cmd);
    }
    if (!a.segmenter_cmd.empty()) {
        segmenter = std::make_unique<CommandSegmenter>(a.segmenter_cmd);
    }
    const EvaluationInputs inputs{backbone, &embedder, scorer.get(), segmenter.get()};
    const auto synth = [&](const SegmentationMask& m, const PaletteVector& p) { return g.synthesize(m, p, a.seed); };
    const EvaluationReport report = evaluate(images, masks, synth, inputs);
    const std::string text = report.to_json().dump(2);
    std::ofstream(a.report) << text << "\n";
    std::cout << text << "\n";
    return 0;
}

// ---- serve -----------------------------------------------------------------

struct ServeArgs {
    std::string ckpt, labels, segmenter_cmd;
    std::string host = "127.0.0.1";
    int port = 8080;
    int num_labels = 0;
    int image_size = 0;
    std::uint64_t seed = kDefaultSeed;
};

HttpServer* g_server = nullptr;

int cmd_serve(const ServeArgs& a) {
    ServiceOptions opts;
    if (!a.ckpt.empty()) {
        require_file(a.ckpt, "checkpoint");
        opts.checkpoint = a.ckpt;
    }
    if (!a.labels.empty()) {
        require_file(a.labels, "label table");
        opts.label_table = a.labels;
    }
    opts.num_labels = a.num_labels;
    opts.image_size = a.image_size;
    opts.default_seed = a.seed;
    if (!a.segmenter_cmd.empty()) {
        opts.segmenter = std::make_shared<CommandSegmenter>(a.segmenter_cmd);
    }
    StudioService service(opts);
    print_section("resolved config", {{"ckpt", a.ckpt},
                                      {"labels", a.labels},
                                      {"segmenter_cmd", a.segmenter_cmd},
                                      {"host", a.host},
                                      {"port", a.port},
                                      {"seed", a.seed},
                                      {"health", service.health().body}});
    HttpServer server(service);
    g_server = &server;
    std::signal(SIGINT, [](int) {
        if (g_server) {
            g_server->stop();
        }
    });
    std::signal(SIGTERM, [](int) {
        if (g_server) {
            g_server->stop();
        }
    });
    std::cout << "listening on http://" << a.host << ":" << a.port << "\n" << std::flush;
    if (!server.listen(a.host, a.port)) {
        g_server = nullptr;
        throw Error("cannot bind " + a.host + ":" + std::to_string(a.port));
    }
    g_server = nullptr;
    return 0;
}

// ---- describe / make-toy-data ----------------------------------------------

struct DescribeArgs {
    std::string config;
};

int cmd_describe(const DescribeArgs& a) {
    TrainConfig cfg;
    if (!a.config.empty()) {
        require_file(a.config, "config file");
        cfg = parse_train_config(a.config);
    }
    print_section("resolved config", to_json(cfg));
    const Generator g(cfg.generator_config(), cfg.seed, false);
    const Discriminator d(cfg.discriminator_config(), cfg.seed, false);
    std::cout << "generator parameters: " << g.parameter_count() << "\n"
              << "discriminator parameters: " << d.parameter_count() << "\n";
    return 0;
}

struct ToyArgs {
    std::string out;
    int count = 4;
    int size = 64;
    int num_labels = 4;
    std::uint64_t seed = kDefaultSeed;
};

int cmd_toy(const ToyArgs& a) {
    print_section("resolved config",
                  {{"out", a.out}, {"count", a.count}, {"size", a.size}, {"num_labels", a.num_labels}, {"seed", a.seed}});
    const fs::path manifest = write_toy_dataset(a.out, a.count, a.size, a.num_labels, a.seed);
    std::cout << "wrote " << manifest.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Palette-conditioned semantic image synthesis"};
    app.require_subcommand(1);

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train a generator/discriminator pair");
    t->add_option("--config", train.config, "Training config (key = value lines)")->required();
    t->add_option("--resume", train.resume, "Checkpoint to resume from");
    t->add_option("--seed", train.seed, "Random seed (default: config value, 1234)");
    t->add_option("--max-steps", train.max_steps, "Override max_steps");
    t->add_option("--output-dir", train.output_dir, "Override output_dir");

    SynthArgs synth;
    auto* s = app.add_subcommand("synthesize", "Generate an image from a mask and a palette");
    s->add_option("--ckpt", synth.ckpt, "Checkpoint")->required();
    s->add_option("--mask", synth.mask, "Label-indexed mask PNG")->required();
    s->add_option("--palette", synth.palette, "Palette JSON")->required();
    s->add_option("--out", synth.out, "Output PNG")->required();
    s->add_option("--seed", synth.seed, "Noise seed")->capture_default_str();

    ExtractArgs extract;
    auto* x = app.add_subcommand("extract-palette", "Per-label mean colors of an image");
    x->add_option("--image", extract.image, "RGB PNG")->required();
    x->add_option("--mask", extract.mask, "Label-indexed mask PNG")->required();
    x->add_option("--num-labels", extract.num_labels, "Number of labels s")->required()->check(CLI::Range(1, 256));
    x->add_option("--out", extract.out, "Palette JSON (stdout when omitted)");

    EvalArgs eval;
    auto* e = app.add_subcommand("evaluate", "Score a checkpoint on a manifest");
    e->add_option("--ckpt", eval.ckpt, "Checkpoint")->required();
    e->add_option("--manifest", eval.manifest, "JSON-lines manifest")->required();
    e->add_option("--report", eval.report, "Output report JSON")->required();
    e->add_option("--backbone", eval.backbone, "Feature backbone: identity, random[:seed] or a file")
        ->capture_default_str();
    e->add_option("--lpips-cmd", eval.lpips_cmd, "External LPIPS command: CMD X.png Y.png prints a number");
    e->add_option("--segmenter-cmd", eval.segmenter_cmd, "External segmenter: CMD IN.png OUT.png");
    e->add_option("--seed", eval.seed, "Noise seed")->capture_default_str();

    ServeArgs serve;
    auto* v = app.add_subcommand("serve", "Run the HTTP API");
    v->add_option("--ckpt", serve.ckpt, "Checkpoint (synthesis returns 409 without one)");
    v->add_option("--labels", serve.labels, "Label colormap JSON");
    v->add_option("--num-labels", serve.num_labels, "Label count when no checkpoint or table is given");
    v->add_option("--image-size", serve.image_size, "Reported image size when no checkpoint is given");
    v->add_option("--segmenter-cmd", serve.segmenter_cmd, "External segmenter: CMD IN.png OUT.png");
    v->add_option("--host", serve.host, "Bind address")->capture_default_str();
    v->add_option("--port", serve.port, "Port")->capture_default_str()->check(CLI::Range(1, 65535));
    v->add_option("--seed", serve.seed, "Seed for requests without one")->capture_default_str();

    DescribeArgs describe;
    auto* d = app.add_subcommand("describe", "Print a config and its parameter counts");
    d->add_option("--config", describe.config, "Training config (defaults when omitted)");

    ToyArgs toy;
    auto* m = app.add_subcommand("make-toy-data", "Write a procedural dataset");
    m->add_option("--out", toy.out, "Output directory")->required();
    m->add_option("--count", toy.count, "Number of samples")->capture_default_str()->check(CLI::Range(1, 100000));
    m->add_option("--size", toy.size, "Image size")->capture_default_str()->check(CLI::Range(8, 4096));
    m->add_option("--num-labels", toy.num_labels, "Number of labels")->capture_default_str()->check(CLI::Range(2, 256));
    m->add_option("--seed", toy.seed, "Random seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& ok) {
        return app.exit(ok);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return kExitUsage;
    }

    try {
        if (*t) return cmd_train(train);
        if (*s) return cmd_synthesize(synth);
        if (*x) return cmd_extract(extract);
        if (*e) return cmd_evaluate(eval);
        if (*v) return cmd_serve(serve);
        if (*d) return cmd_describe(describe);
        if (*m) return cmd_toy(toy);
    } catch (const NonFiniteError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitRuntime;
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
