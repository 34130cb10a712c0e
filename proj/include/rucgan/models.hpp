// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Generator: entry conv on the downsampled one-hot mask, then one P-Norm
// ResBlk per stage followed by ×2 nearest upsampling, then leaky-ReLU, a 3×3
// conv to RGB and tanh. Its only inputs are a mask, a palette and optional
// noise; no reference image is consumed anywhere.
//
// Discriminator: multi-scale patch discriminator on concat(one-hot mask, image).
// Each scale stacks stride-2 4×4 spectral-normalized convs (instance norm on
// all but the first) and ends with a 3×3 one-channel logit conv.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rucgan/netblocks.hpp"

namespace rucgan {

struct GeneratorConfig {
    int height = 256;
    int width = 256;
    int num_labels = 19;
    std::vector<int> stage_channels{1024, 1024, 512, 256, 128, 64};
    PNormOptions pnorm;

    int num_stages() const { return static_cast<int>(stage_channels.size()); }
    int base_height() const { return height >> num_stages(); }
    int base_width() const { return width >> num_stages(); }
    void validate() const;
};

struct DiscriminatorConfig {
    int num_scales = 2;
    int layers_per_scale = 4;
    int base_channels = 64;
    int num_labels = 19;

    void validate() const;
};

nlohmann::json to_json(const GeneratorConfig& c);
nlohmann::json to_json(const DiscriminatorConfig& c);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);
DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j);

class Generator {
public:
    /// With materialize = false the parameters carry shapes only (for describe/count).
    Generator(GeneratorConfig config, std::uint64_t init_seed, bool materialize = true);

    /// Batched forward: N×3×H×W in (-1, 1). Noise is drawn from `noise_rng` when non-null.
    ag::Var forward(std::span<const SegmentationMask> masks, std::span<const PaletteVector> palettes,
                    Rng* noise_rng) const;

    /// Single-image inference without gradient recording: 3×H×W. A seed enables noise.
    Tensor synthesize(const SegmentationMask& mask, const PaletteVector& palette,
                      std::optional<std::uint64_t> noise_seed) const;

    const GeneratorConfig& config() const { return config_; }
    ParamList parameters() const;
    std::size_t parameter_count() const { return count_parameters(parameters()); }

    Conv2d entry;
    std::vector<PNormResBlk> blocks;
    Conv2d exit;

private:
    void validate_inputs(std::span<const SegmentationMask> masks, std::span<const PaletteVector> palettes) const;

    GeneratorConfig config_;
};

struct ScaleOutput {
    std::vector<ag::Var> features;  // one per stride-2 layer, post-activation
    ag::Var logits;                 // N×1×h×w patch logits
};

class Discriminator {
public:
    Discriminator(DiscriminatorConfig config, std::uint64_t init_seed, bool materialize = true);

    /// `image` is N×3×H×W, `mask_planes` the matching N×s×H×W one-hot tensor.
    /// `update_sn` advances the spectral-norm power iteration by one step.
    std::vector<ScaleOutput> forward(const ag::Var& image, const Tensor& mask_planes, bool update_sn);

    const DiscriminatorConfig& config() const { return config_; }
    ParamList parameters() const;
    BufferList buffers();
    std::size_t parameter_count() const { return count_parameters(parameters()); }

    /// Per scale: the stride-2 layers followed by the logit layer.
    std::vector<std::vector<SpectralConv2d>> scales;

private:
    DiscriminatorConfig config_;
};

}  // namespace rucgan
