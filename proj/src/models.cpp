// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "rucgan/models.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "rucgan/dataio.hpp"
#include "rucgan/error.hpp"

namespace rucgan {

void GeneratorConfig::validate() const {
    if (stage_channels.empty()) {
        throw ConfigurationError("generator needs at least one stage");
    }
    if (num_labels < 1) {
        throw ConfigurationError("num_labels must be >= 1");
    }
    const int factor = 1 << num_stages();
    if (height % factor != 0 || width % factor != 0) {
        throw ConfigurationError("output size " + std::to_string(height) + "x" + std::to_string(width) +
                                 " is not divisible by 2^" + std::to_string(num_stages()));
    }
    if (std::any_of(stage_channels.begin(), stage_channels.end(), [](int c) { return c < 1; }) ||
        pnorm.hidden_channels < 1) {
        throw ConfigurationError("channel counts must be positive");
    }
}

void DiscriminatorConfig::validate() const {
    if (num_scales < 1 || layers_per_scale < 1 || base_channels < 1 || num_labels < 1) {
        throw ConfigurationError("discriminator scales, layers, channels and labels must be >= 1");
    }
}

nlohmann::json to_json(const GeneratorConfig& c) {
    return {{"height", c.height},
            {"width", c.width},
            {"num_labels", c.num_labels},
            {"stage_channels", c.stage_channels},
            {"pnorm_hidden", c.pnorm.hidden_channels},
            {"pnorm_epsilon", c.pnorm.epsilon}};
}

nlohmann::json to_json(const DiscriminatorConfig& c) {
    return {{"num_scales", c.num_scales},
            {"layers_per_scale", c.layers_per_scale},
            {"base_channels", c.base_channels},
            {"num_labels", c.num_labels}};
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
    GeneratorConfig c;
    c.height = j.at("height").get<int>();
    c.width = j.at("width").get<int>();
    c.num_labels = j.at("num_labels").get<int>();
    c.stage_channels = j.at("stage_channels").get<std::vector<int>>();
    c.pnorm.hidden_channels = j.at("pnorm_hidden").get<int>();
    c.pnorm.epsilon = j.at("pnorm_epsilon").get<double>();
    return c;
}

DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j) {
    DiscriminatorConfig c;
    c.num_scales = j.at("num_scales").get<int>();
    c.layers_per_scale = j.at("layers_per_scale").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.num_labels = j.at("num_labels").get<int>();
    return c;
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

Generator::Generator(GeneratorConfig config, std::uint64_t init_seed, bool materialize) : config_(std::move(config)) {
    config_.validate();
    Rng rng(init_seed);
    Rng* r = materialize ? &rng : nullptr;
    const int s = config_.num_labels;
    entry = Conv2d(s, config_.stage_channels.front(), 3, 1, 1, true, r);
    int in = config_.stage_channels.front();
    for (int out : config_.stage_channels) {
        blocks.emplace_back(in, out, s, config_.pnorm, r);
        in = out;
    }
    exit = Conv2d(in, 3, 3, 1, 1, true, r);
}

void Generator::validate_inputs(std::span<const SegmentationMask> masks,
                                std::span<const PaletteVector> palettes) const {
    if (masks.empty() || masks.size() != palettes.size()) {
        throw DimensionError("generator needs one palette per mask");
    }
    for (const auto& m : masks) {
        if (m.height() != config_.height || m.width() != config_.width) {
            throw DimensionError("mask " + std::to_string(m.height()) + "x" + std::to_string(m.width()) +
                                 " does not match generator size " + std::to_string(config_.height) + "x" +
                                 std::to_string(config_.width));
        }
        if (m.num_labels() != config_.num_labels) {
            throw LabelRangeError("mask declares " + std::to_string(m.num_labels()) + " labels, generator expects " +
                                  std::to_string(config_.num_labels));
        }
    }
    for (const auto& p : palettes) {
        if (p.num_labels() != config_.num_labels) {
            throw LabelRangeError("palette has " + std::to_string(p.num_labels()) + " entries, generator expects " +
                                  std::to_string(config_.num_labels));
        }
    }
}

ag::Var Generator::forward(std::span<const SegmentationMask> masks, std::span<const PaletteVector> palettes,
                           Rng* noise_rng) const {
    validate_inputs(masks, palettes);
    const int stages = config_.num_stages();
    auto masks_at = [&](int factor) {
        std::vector<SegmentationMask> out;
        out.reserve(masks.size());
        for (const auto& m : masks) {
            out.push_back(downsample_mask(m, factor));
        }
        return out;
    };
    const auto base_masks = masks_at(1 << stages);
    ag::Var x = entry.forward(ag::Var(one_hot_batch(base_masks)));
    for (int i = 0; i < stages; ++i) {
        const auto stage_masks = masks_at(1 << (stages - i));
        const Tensor style = semantic_sampling_batch(palettes, stage_masks);
        x = blocks[static_cast<std::size_t>(i)].forward(x, style, noise_rng);
        x = ag::upsample_nearest2x(x);
    }
    return ag::tanh(exit.forward(ag::leaky_relu(x, kLeakySlope)));
}

Tensor Generator::synthesize(const SegmentationMask& mask, const PaletteVector& palette,
                             std::optional<std::uint64_t> noise_seed) const {
    ag::NoGradGuard guard;
    std::optional<Rng> rng;
    if (noise_seed) {
        rng.emplace(*noise_seed);
    }
    const ag::Var out = forward(std::span(&mask, 1), std::span(&palette, 1), rng ? &*rng : nullptr);
    return out.value().reshaped({3, config_.height, config_.width});
}

ParamList Generator::parameters() const {
    ParamList out;
    entry.collect(out, "entry");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        blocks[i].collect(out, "block" + std::to_string(i));
    }
    exit.collect(out, "exit");
    return out;
}

// ---------------------------------------------------------------------------
// Discriminator
// ---------------------------------------------------------------------------

Discriminator::Discriminator(DiscriminatorConfig config, std::uint64_t init_seed, bool materialize)
    : config_(config) {
    config_.validate();
    Rng rng(init_seed);
    Rng* r = materialize ? &rng : nullptr;
    for (int k = 0; k < config_.num_scales; ++k) {
        std::vector<SpectralConv2d> layers;
        int in = config_.num_labels + 3;
        for (int l = 0; l < config_.layers_per_scale; ++l) {
            const int out = config_.base_channels << std::min(l, 3);
            layers.emplace_back(in, out, 4, 2, 1, r);
            in = out;
        }
        layers.emplace_back(in, 1, 3, 1, 1, r);
        scales.push_back(std::move(layers));
    }
}

std::vector<ScaleOutput> Discriminator::forward(const ag::Var& image, const Tensor& mask_planes, bool update_sn) {
    const Shape& is = image.shape();
    if (is.size() != 4 || is[1] != 3 || mask_planes.rank() != 4 || mask_planes.dim(0) != is[0] ||
        mask_planes.dim(2) != is[2] || mask_planes.dim(3) != is[3]) {
        throw DimensionError("discriminator: image " + shape_str(is) + " and mask " +
                             shape_str(mask_planes.shape()) + " do not align");
    }
    if (mask_planes.dim(1) != config_.num_labels) {
        throw LabelRangeError("discriminator expects " + std::to_string(config_.num_labels) + " mask channels");
    }
    ag::Var input = ag::concat_channels({ag::Var(mask_planes), image});
    std::vector<ScaleOutput> outputs;
    for (std::size_t k = 0; k < scales.size(); ++k) {
        if (k > 0) {
            input = ag::avg_pool2x(input);
        }
        auto& layers = scales[k];
        ScaleOutput out;
        ag::Var x = input;
        for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
            x = layers[l].forward(x, update_sn);
            if (l > 0) {
                x = ag::instance_norm(x, 1e-5);
            }
            x = ag::leaky_relu(x, kLeakySlope);
            out.features.push_back(x);
        }
        out.logits = layers.back().forward(x, update_sn);
        outputs.push_back(std::move(out));
    }
    return outputs;
}

ParamList Discriminator::parameters() const {
    ParamList out;
    for (std::size_t k = 0; k < scales.size(); ++k) {
        for (std::size_t l = 0; l < scales[k].size(); ++l) {
            scales[k][l].collect(out, "scale" + std::to_string(k) + ".layer" + std::to_string(l));
        }
    }
    return out;
}

BufferList Discriminator::buffers() {
    BufferList out;
    for (std::size_t k = 0; k < scales.size(); ++k) {
        for (std::size_t l = 0; l < scales[k].size(); ++l) {
            scales[k][l].collect_buffers(out, "scale" + std::to_string(k) + ".layer" + std::to_string(l));
        }
    }
    return out;
}

}  // namespace rucgan
