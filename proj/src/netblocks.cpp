// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "rucgan/netblocks.hpp"

#include <algorithm>
#include <cmath>

#include "rucgan/error.hpp"

namespace rucgan {

ChannelStats pooled_channel_stats(const Tensor& h, double epsilon) {
    if (h.rank() != 4) {
        throw DimensionError("pooled_channel_stats expects N×C×H×W");
    }
    const int n = h.dim(0), c = h.dim(1), hh = h.dim(2), ww = h.dim(3);
    const double count = static_cast<double>(n) * hh * ww;
    ChannelStats stats{std::vector<double>(static_cast<std::size_t>(c)), std::vector<double>(static_cast<std::size_t>(c))};
    for (int ch = 0; ch < c; ++ch) {
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int y = 0; y < hh; ++y) {
                for (int x = 0; x < ww; ++x) {
                    const double v = h.at(i, ch, y, x);
                    sum += v;
                    sq += v * v;
                }
            }
        }
        const double mu = sum / count;
        stats.mean[static_cast<std::size_t>(ch)] = mu;
        stats.stddev[static_cast<std::size_t>(ch)] = std::max(std::sqrt(std::max(0.0, sq / count - mu * mu)), epsilon);
    }
    return stats;
}

PNormLayer::PNormLayer(int channels, int num_labels, PNormOptions options, Rng* rng)
    : shared(3 * num_labels, options.hidden_channels, 3, 1, 1, true, rng),
      gamma(options.hidden_channels, channels, 3, 1, 1, true, rng),
      beta(options.hidden_channels, channels, 3, 1, 1, true, rng),
      channels_(channels),
      num_labels_(num_labels),
      options_(options) {
    if (options.epsilon <= 0.0) {
        throw ParameterError("P-Norm epsilon must be positive");
    }
    if (rng) {
        // Start as the identity modulation: gamma ≈ 1, beta ≈ 0.
        gamma.bias->mutable_value().fill(1.0);
        beta.bias->mutable_value().fill(0.0);
        noise_scale = ag::Var(Tensor({channels}, 0.0), true);
    } else {
        noise_scale = ag::Var(Tensor::shape_only({channels}), true);
    }
}

std::pair<ag::Var, ag::Var> PNormLayer::modulation(const Tensor& style) const {
    const ag::Var hidden = ag::relu(shared.forward(ag::Var(style)));
    return {gamma.forward(hidden), beta.forward(hidden)};
}

ag::Var PNormLayer::forward(const ag::Var& h, const Tensor& style, const Tensor* noise) const {
    const Shape& hs = h.shape();
    if (hs.size() != 4 || hs[1] != channels_) {
        throw DimensionError("P-Norm expects N×" + std::to_string(channels_) + "×H×W, got " + shape_str(hs));
    }
    if (style.rank() != 4 || style.dim(1) != 3 * num_labels_) {
        throw LabelRangeError("style map must have 3·s = " + std::to_string(3 * num_labels_) + " channels, got " +
                              shape_str(style.shape()));
    }
    if (style.dim(0) != hs[0] || style.dim(2) != hs[2] || style.dim(3) != hs[3]) {
        throw DimensionError("style map " + shape_str(style.shape()) + " does not match activation " + shape_str(hs));
    }
    ag::Var x = noise ? ag::add_channel_noise(h, noise_scale, *noise) : h;
    const ag::Var normalized = ag::batch_standardize(x, options_.epsilon);
    auto [g, b] = modulation(style);
    return ag::add(ag::mul(g, normalized), b);
}

ag::Var PNormLayer::forward(const ag::Var& h, std::span<const PaletteVector> palettes,
                            std::span<const SegmentationMask> masks, const Tensor* noise) const {
    for (const auto& p : palettes) {
        if (p.num_labels() != num_labels_) {
            throw LabelRangeError("palette length " + std::to_string(p.num_labels()) + " != " +
                                  std::to_string(num_labels_));
        }
    }
    for (const auto& m : masks) {
        if (m.height() != h.shape()[2] || m.width() != h.shape()[3]) {
            throw DimensionError("mask " + std::to_string(m.height()) + "x" + std::to_string(m.width()) +
                                 " does not match activation " + shape_str(h.shape()));
        }
    }
    if (static_cast<int>(masks.size()) != h.shape()[0]) {
        throw DimensionError("one mask per batch entry required");
    }
    return forward(h, semantic_sampling_batch(palettes, masks), noise);
}

void PNormLayer::collect(ParamList& out, const std::string& prefix) const {
    shared.collect(out, prefix + ".shared");
    gamma.collect(out, prefix + ".gamma");
    beta.collect(out, prefix + ".beta");
    out.emplace_back(prefix + ".noise_scale", noise_scale);
}

PNormResBlk::PNormResBlk(int in_channels, int out_channels, int num_labels, PNormOptions options, Rng* rng)
    : norm1(in_channels, num_labels, options, rng),
      norm2(out_channels, num_labels, options, rng),
      norm3(out_channels, num_labels, options, rng),
      conv1(in_channels, out_channels, 3, 1, 1, true, rng),
      conv2(out_channels, out_channels, 3, 1, 1, true, rng),
      conv3(out_channels, out_channels, 3, 1, 1, true, rng) {
    if (in_channels != out_channels) {
        shortcut.emplace(in_channels, out_channels, 1, 1, 0, false, rng);
    }
}

ag::Var PNormResBlk::forward(const ag::Var& h, const Tensor& style, Rng* noise_rng) const {
    const Shape& s = h.shape();
    auto draw = [&]() -> std::optional<Tensor> {
        if (!noise_rng) {
            return std::nullopt;
        }
        return normal_tensor({s[0], 1, s[2], s[3]}, *noise_rng);
    };
    const std::optional<Tensor> n1 = draw();
    ag::Var x = conv1.forward(ag::leaky_relu(norm1.forward(h, style, n1 ? &*n1 : nullptr), kLeakySlope));
    const std::optional<Tensor> n2 = draw();
    x = conv2.forward(ag::leaky_relu(norm2.forward(x, style, n2 ? &*n2 : nullptr), kLeakySlope));
    const std::optional<Tensor> n3 = draw();
    x = conv3.forward(ag::leaky_relu(norm3.forward(x, style, n3 ? &*n3 : nullptr), kLeakySlope));
    const ag::Var skip = shortcut ? shortcut->forward(h) : h;
    return ag::add(skip, x);
}

void PNormResBlk::collect(ParamList& out, const std::string& prefix) const {
    norm1.collect(out, prefix + ".norm1");
    norm2.collect(out, prefix + ".norm2");
    norm3.collect(out, prefix + ".norm3");
    conv1.collect(out, prefix + ".conv1");
    conv2.collect(out, prefix + ".conv2");
    conv3.collect(out, prefix + ".conv3");
    if (shortcut) {
        shortcut->collect(out, prefix + ".shortcut");
    }
}

}  // namespace rucgan
