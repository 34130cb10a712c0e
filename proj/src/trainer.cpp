// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "rucgan/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rucgan/archive.hpp"
#include "rucgan/augment.hpp"
#include "rucgan/error.hpp"

namespace rucgan {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(lr_g > 0.0) || !(lr_d > 0.0)) {
        throw ConfigurationError("learning rates must be > 0");
    }
    if (batch_size < 1) {
        throw ConfigurationError("batch_size must be >= 1");
    }
    if (max_steps < 0 || checkpoint_every < 0) {
        throw ConfigurationError("max_steps and checkpoint_every must be >= 0");
    }
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ConfigurationError("Adam betas must lie in [0, 1)");
    }
    if (lambda1 < 0.0 || lambda2 < 0.0) {
        throw ConfigurationError("loss weights must be >= 0");
    }
    generator_config().validate();
    discriminator_config().validate();
}

GeneratorConfig TrainConfig::generator_config() const {
    GeneratorConfig g;
    g.height = image_size;
    g.width = image_size;
    g.num_labels = num_labels;
    g.stage_channels = stage_channels;
    g.pnorm.hidden_channels = pnorm_hidden;
    return g;
}

DiscriminatorConfig TrainConfig::discriminator_config() const {
    DiscriminatorConfig d;
    d.num_scales = disc_num_scales;
    d.base_channels = disc_base_channels;
    d.num_labels = num_labels;
    return d;
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"lr_g", c.lr_g},
            {"lr_d", c.lr_d},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"batch_size", c.batch_size},
            {"max_steps", c.max_steps},
            {"scm_enabled", c.scm_enabled},
            {"checkpoint_every", c.checkpoint_every},
            {"image_size", c.image_size},
            {"num_labels", c.num_labels},
            {"stage_channels", c.stage_channels},
            {"pnorm_hidden", c.pnorm_hidden},
            {"disc_base_channels", c.disc_base_channels},
            {"disc_num_scales", c.disc_num_scales},
            {"lambda1", c.lambda1},
            {"lambda2", c.lambda2},
            {"backbone", c.backbone},
            {"manifest", c.manifest},
            {"output_dir", c.output_dir},
            {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.lr_g = j.at("lr_g").get<double>();
    c.lr_d = j.at("lr_d").get<double>();
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.max_steps = j.at("max_steps").get<long>();
    c.scm_enabled = j.at("scm_enabled").get<bool>();
    c.checkpoint_every = j.at("checkpoint_every").get<long>();
    c.image_size = j.at("image_size").get<int>();
    c.num_labels = j.at("num_labels").get<int>();
    c.stage_channels = j.at("stage_channels").get<std::vector<int>>();
    c.pnorm_hidden = j.at("pnorm_hidden").get<int>();
    c.disc_base_channels = j.at("disc_base_channels").get<int>();
    c.disc_num_scales = j.at("disc_num_scales").get<int>();
    c.lambda1 = j.at("lambda1").get<double>();
    c.lambda2 = j.at("lambda2").get<double>();
    c.backbone = j.at("backbone").get<std::string>();
    c.manifest = j.at("manifest").get<std::string>();
    c.output_dir = j.at("output_dir").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    throw ConfigurationError("key '" + key + "': expected a boolean, got '" + v + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    std::istringstream is(v);
    T out{};
    is >> out;
    if (!is || !is.eof()) {
        throw ConfigurationError("key '" + key + "': cannot parse '" + v + "'");
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_number<int>(key, trim(item)));
    }
    if (out.empty()) {
        throw ConfigurationError("key '" + key + "': empty list");
    }
    return out;
}

}  // namespace

TrainConfig parse_train_config_text(const std::string& text) {
    TrainConfig c;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters = {
        {"lr_g", [&](auto& k, auto& v) { c.lr_g = parse_number<double>(k, v); }},
        {"lr_d", [&](auto& k, auto& v) { c.lr_d = parse_number<double>(k, v); }},
        {"adam_beta1", [&](auto& k, auto& v) { c.adam_beta1 = parse_number<double>(k, v); }},
        {"adam_beta2", [&](auto& k, auto& v) { c.adam_beta2 = parse_number<double>(k, v); }},
        {"batch_size", [&](auto& k, auto& v) { c.batch_size = parse_number<int>(k, v); }},
        {"max_steps", [&](auto& k, auto& v) { c.max_steps = parse_number<long>(k, v); }},
        {"scm_enabled", [&](auto& k, auto& v) { c.scm_enabled = parse_bool(k, v); }},
        {"checkpoint_every", [&](auto& k, auto& v) { c.checkpoint_every = parse_number<long>(k, v); }},
        {"image_size", [&](auto& k, auto& v) { c.image_size = parse_number<int>(k, v); }},
        {"num_labels", [&](auto& k, auto& v) { c.num_labels = parse_number<int>(k, v); }},
        {"stage_channels", [&](auto& k, auto& v) { c.stage_channels = parse_int_list(k, v); }},
        {"pnorm_hidden", [&](auto& k, auto& v) { c.pnorm_hidden = parse_number<int>(k, v); }},
        {"disc_base_channels", [&](auto& k, auto& v) { c.disc_base_channels = parse_number<int>(k, v); }},
        {"disc_num_scales", [&](auto& k, auto& v) { c.disc_num_scales = parse_number<int>(k, v); }},
        {"lambda1", [&](auto& k, auto& v) { c.lambda1 = parse_number<double>(k, v); }},
        {"lambda2", [&](auto& k, auto& v) { c.lambda2 = parse_number<double>(k, v); }},
        {"backbone", [&](auto&, auto& v) { c.backbone = v; }},
        {"manifest", [&](auto&, auto& v) { c.manifest = v; }},
        {"output_dir", [&](auto&, auto& v) { c.output_dir = v; }},
        {"seed", [&](auto& k, auto& v) { c.seed = parse_number<std::uint64_t>(k, v); }},
    };
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigurationError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw ConfigurationError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        it->second(key, value);
    }
    c.validate();
    return c;
}

TrainConfig parse_train_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigurationError("cannot open config file " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    TrainConfig c = parse_train_config_text(ss.str());
    // Relative manifest paths are relative to the config file.
    if (!c.manifest.empty() && fs::path(c.manifest).is_relative()) {
        c.manifest = (path.parent_path() / c.manifest).string();
    }
    return c;
}

std::string format_train_config(const TrainConfig& c) {
    std::ostringstream os;
    const auto j = to_json(c);
    for (auto it = j.begin(); it != j.end(); ++it) {
        os << it.key() << " = ";
        if (it.value().is_string()) {
            os << it.value().get<std::string>();
        } else if (it.value().is_array()) {
            bool first = true;
            for (const auto& v : it.value()) {
                os << (first ? "" : ",") << v.get<int>();
                first = false;
            }
        } else {
            os << it.value().dump();
        }
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// state
// ---------------------------------------------------------------------------

std::unique_ptr<TrainState> TrainState::create(const TrainConfig& config,
                                               std::shared_ptr<const PerceptualBackbone> backbone) {
    config.validate();
    if (!backbone) {
        backbone = make_backbone(config.backbone);
    }
    Generator g(config.generator_config(), config.seed);
    Discriminator d(config.discriminator_config(), config.seed + 1);
    Adam opt_g(g.parameters(), AdamOptions{config.lr_g, config.adam_beta1, config.adam_beta2});
    Adam opt_d(d.parameters(), AdamOptions{config.lr_d, config.adam_beta1, config.adam_beta2});
    return std::unique_ptr<TrainState>(new TrainState{config, std::move(g), std::move(d), std::move(opt_g),
                                                      std::move(opt_d), Rng(config.seed + 2), 0,
                                                      std::move(backbone)});
}

nlohmann::json StepRecord::to_json() const {
    return {{"step", step},
            {"loss_d", loss_d},
            {"loss_g", loss_g},
            {"loss_percept", loss_percept},
            {"loss_fm", loss_fm},
            {"loss_adv", loss_adv},
            {"scm_delta", scm_delta},
            {"scm_labels", scm_labels}};
}

namespace {

Tensor stack_images(std::span<const Tensor> images) {
    const Shape& s = images.front().shape();
    Tensor out({static_cast<int>(images.size()), s[0], s[1], s[2]});
    const std::size_t per = images.front().numel();
    for (std::size_t i = 0; i < images.size(); ++i) {
        require_same_shape(images[i], images.front(), "stack_images");
        std::copy(images[i].data().begin(), images[i].data().end(), out.ptr() + i * per);
    }
    return out;
}

void check_finite(double v, long step, const char* name) {
    if (!std::isfinite(v)) {
        throw NonFiniteError(step, name);
    }
}

// Temporarily stops gradient accumulation into a parameter set.
class FreezeGuard {
public:
    explicit FreezeGuard(const ParamList& params) : params_(params) {
        for (const auto& [n, p] : params_) {
            p.node()->requires_grad = false;
        }
    }
    ~FreezeGuard() {
        for (const auto& [n, p] : params_) {
            p.node()->requires_grad = true;
        }
    }
    FreezeGuard(const FreezeGuard&) = delete;
    FreezeGuard& operator=(const FreezeGuard&) = delete;

private:
    const ParamList& params_;
};

std::vector<ag::Var> logits_of(const std::vector<ScaleOutput>& outs) {
    std::vector<ag::Var> l;
    for (const auto& o : outs) {
        l.push_back(o.logits);
    }
    return l;
}

}  // namespace

PreparedBatch prepare_batch(TrainState& state, std::span<const Sample> batch, StepRecord& rec) {
    if (batch.empty()) {
        throw DimensionError("train_step: empty batch");
    }
    PreparedBatch out;
    std::vector<Tensor> targets;
    for (const auto& sample : batch) {
        if (state.config.scm_enabled) {
            MixResult mix = semantic_color_mix(sample.image, sample.mask, state.rng);
            rec.scm_delta.push_back(mix.delta);
            rec.scm_labels.push_back(mix.selection.selected);
            targets.push_back(std::move(mix.mixed));
        } else {
            targets.push_back(sample.image);
        }
        out.masks.push_back(sample.mask);
        rec.palettes.push_back(extract_palette(targets.back(), sample.mask));
    }
    rec.targets = stack_images(targets);
    out.planes = one_hot_batch(out.masks);
    return out;
}

void discriminator_step(TrainState& state, const PreparedBatch& batch, StepRecord& rec) {
    const ag::Var real(rec.targets);
    state.opt_d.zero_grad();
    ag::Var fake;
    {
        ag::NoGradGuard no_grad;
        fake = state.generator.forward(batch.masks, rec.palettes, &state.rng);
    }
    const auto real_out = state.discriminator.forward(real, batch.planes, true);
    const auto fake_out = state.discriminator.forward(ag::detach(fake), batch.planes, false);
    const ag::Var loss_d = hinge_d_loss(logits_of(real_out), logits_of(fake_out));
    rec.loss_d = loss_d.item();
    check_finite(rec.loss_d, state.step, "loss_d");
    ag::backward(loss_d);
    state.opt_d.step();
}

void generator_step(TrainState& state, const PreparedBatch& batch, StepRecord& rec) {
    const ag::Var real(rec.targets);
    state.opt_g.zero_grad();
    const ParamList d_params = state.discriminator.parameters();
    FreezeGuard freeze(d_params);
    const ag::Var fake = state.generator.forward(batch.masks, rec.palettes, &state.rng);
    std::vector<ScaleOutput> real_out;
    {
        ag::NoGradGuard no_grad;
        real_out = state.discriminator.forward(real, batch.planes, false);
    }
    const auto fake_out = state.discriminator.forward(fake, batch.planes, false);
    GeneratorLossParts parts;
    parts.perceptual = perceptual_loss(fake, real, state.backbone.get());
    for (std::size_t k = 0; k < fake_out.size(); ++k) {
        parts.feature_matching.push_back(feature_matching_loss(real_out[k].features, fake_out[k].features));
        parts.adversarial.push_back(hinge_g_loss({fake_out[k].logits}));
    }
    const ag::Var loss_g = total_g_loss(parts, LossWeights{state.config.lambda1, state.config.lambda2});
    rec.loss_g = loss_g.item();
    rec.loss_percept = parts.perceptual.item();
    rec.loss_fm = 0.0;
    rec.loss_adv = 0.0;
    for (std::size_t k = 0; k < parts.adversarial.size(); ++k) {
        rec.loss_fm += parts.feature_matching[k].item();
        rec.loss_adv += parts.adversarial[k].item();
    }
    check_finite(rec.loss_percept, state.step, "loss_percept");
    check_finite(rec.loss_fm, state.step, "loss_fm");
    check_finite(rec.loss_g, state.step, "loss_g");
    ag::backward(loss_g);
    state.opt_g.step();
}

StepRecord train_step(TrainState& state, std::span<const Sample> batch) {
    StepRecord rec;
    rec.step = state.step;
    const PreparedBatch prepared = prepare_batch(state, batch, rec);
    discriminator_step(state, prepared, rec);
    generator_step(state, prepared, rec);
    ++state.step;
    return rec;
}

std::vector<Sample> batch_for_step(std::span<const Sample> dataset, long step, int batch_size) {
    if (dataset.empty()) {
        throw DimensionError("empty dataset");
    }
    std::vector<Sample> batch;
    for (int i = 0; i < batch_size; ++i) {
        const std::size_t idx = static_cast<std::size_t>(step * batch_size + i) % dataset.size();
        batch.push_back(dataset[idx]);
    }
    return batch;
}

void run_training(TrainState& state, std::span<const Sample> dataset, std::ostream* log,
                  const fs::path& checkpoint_dir) {
    const TrainConfig& cfg = state.config;
    if (!checkpoint_dir.empty()) {
        fs::create_directories(checkpoint_dir);
    }
    while (state.step < cfg.max_steps) {
        const auto batch = batch_for_step(dataset, state.step, cfg.batch_size);
        const StepRecord rec = train_step(state, batch);
        if (log) {
            *log << rec.to_json().dump() << '\n';
            log->flush();
        }
        const bool periodic = cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0;
        if (!checkpoint_dir.empty() && periodic && state.step < cfg.max_steps) {
            save_checkpoint(state, checkpoint_dir / ("step_" + std::to_string(state.step) + ".ckpt"));
        }
    }
    if (!checkpoint_dir.empty()) {
        save_checkpoint(state, checkpoint_dir / "final.ckpt");
    }
}

double reconstruction_l1(const Generator& generator, std::span<const Sample> samples) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& s : samples) {
        const Tensor out = generator.synthesize(s.mask, extract_palette(s.image, s.mask), std::nullopt);
        for (std::size_t i = 0; i < out.numel(); ++i) {
            total += std::abs(out[i] - s.image[i]);
        }
        count += out.numel();
    }
    return total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

namespace {

void export_params(TensorArchive& archive, const ParamList& params, const std::string& prefix) {
    for (const auto& [name, p] : params) {
        archive.tensors.emplace_back(prefix + name, p.value());
    }
}

void import_params(const TensorArchive& archive, const ParamList& params, const std::string& prefix) {
    for (const auto& [name, p] : params) {
        const Tensor& t = archive.get(prefix + name);
        if (!t.same_shape(p.value())) {
            throw FormatError("checkpoint tensor " + prefix + name + " has shape " + shape_str(t.shape()) +
                              ", model expects " + shape_str(p.value().shape()));
        }
        ag::Var v = p;
        v.mutable_value() = t;
    }
}

TensorArchive read_checkpoint_archive(const fs::path& path) {
    TensorArchive archive = read_archive(path, kCheckpointMagic);
    if (archive.header.value("format_version", 0) != 1) {
        throw FormatError(path.string() + ": unsupported checkpoint version");
    }
    return archive;
}

}  // namespace

void save_checkpoint(const TrainState& state, const fs::path& path) {
    TensorArchive archive;
    archive.magic = kCheckpointMagic;
    archive.header = {{"format_version", 1},
                      {"step", state.step},
                      {"train_config", to_json(state.config)},
                      {"generator", to_json(state.generator.config())},
                      {"discriminator", to_json(state.discriminator.config())},
                      {"rng_state", rng_state(state.rng)},
                      {"backbone", state.backbone ? state.backbone->name() : ""}};
    export_params(archive, state.generator.parameters(), "G/");
    export_params(archive, state.discriminator.parameters(), "D/");
    auto& disc = const_cast<Discriminator&>(state.discriminator);
    for (const auto& [name, t] : disc.buffers()) {
        archive.tensors.emplace_back("Dbuf/" + name, *t);
    }
    state.opt_g.export_state(archive, "optG/");
    state.opt_d.export_state(archive, "optD/");
    write_archive(path, archive);
}

std::unique_ptr<TrainState> load_checkpoint(const fs::path& path, const TrainConfig* expected,
                                            std::shared_ptr<const PerceptualBackbone> backbone) {
    const TensorArchive archive = read_checkpoint_archive(path);
    TrainConfig stored;
    try {
        stored = train_config_from_json(archive.header.at("train_config"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad config block: " + e.what());
    }
    if (expected) {
        if (expected->num_labels != stored.num_labels) {
            throw ConfigurationError("checkpoint num_labels " + std::to_string(stored.num_labels) +
                                     " does not match configured " + std::to_string(expected->num_labels));
        }
        if (expected->image_size != stored.image_size) {
            throw ConfigurationError("checkpoint image_size " + std::to_string(stored.image_size) +
                                     " does not match configured " + std::to_string(expected->image_size));
        }
        // Run-length settings may be extended on resume.
        stored.max_steps = expected->max_steps;
        stored.checkpoint_every = expected->checkpoint_every;
        stored.output_dir = expected->output_dir;
        stored.manifest = expected->manifest;
    }
    auto state = TrainState::create(stored, std::move(backbone));
    import_params(archive, state->generator.parameters(), "G/");
    import_params(archive, state->discriminator.parameters(), "D/");
    for (const auto& [name, t] : state->discriminator.buffers()) {
        const Tensor& stored_t = archive.get("Dbuf/" + name);
        if (!stored_t.same_shape(*t)) {
            throw FormatError("checkpoint buffer " + name + " shape mismatch");
        }
        *t = stored_t;
    }
    state->opt_g.import_state(archive, "optG/");
    state->opt_d.import_state(archive, "optD/");
    set_rng_state(state->rng, archive.header.at("rng_state").get<std::string>());
    state->step = archive.header.at("step").get<long>();
    return state;
}

Generator load_generator(const fs::path& path) {
    const TensorArchive archive = read_checkpoint_archive(path);
    GeneratorConfig cfg;
    try {
        cfg = generator_config_from_json(archive.header.at("generator"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad generator config: " + e.what());
    }
    Generator g(cfg, 0);
    import_params(archive, g.parameters(), "G/");
    return g;
}

std::uint64_t hash_parameters(const ParamList& params) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& [name, p] : params) {
        for (double v : p.value().data()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            h ^= bits;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

}  // namespace rucgan
