// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Palette normalization (P-Norm) and the P-Norm residual block.
//
// A P-Norm layer standardizes each channel of h with statistics pooled over
// the batch and both spatial axes,
//
//     mu_c    = mean_{n,y,x} h
//     sigma_c = sqrt(mean_{n,y,x} h^2 - mu_c^2)      (floored at eps)
//
// and modulates the result with per-position gamma and beta predicted from the
// semantic style map (palette colors broadcast into their mask regions):
//
//     out = gamma[c,y,x] * (h - mu_c) / sigma_c + beta[c,y,x]
//
// Statistics are recomputed on every call; no running averages are kept, so a
// batch of one uses that sample's own statistics.

#pragma once

#include <span>
#include <utility>

#include "rucgan/nn.hpp"
#include "rucgan/palette.hpp"

namespace rucgan {

inline constexpr double kLeakySlope = 0.2;

struct PNormOptions {
    int hidden_channels = 128;
    double epsilon = 1e-5;
};

struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // after the epsilon floor
};

/// Per-channel mean and standard deviation over N, H, W using the
/// single-pass form sigma^2 = E[h^2] - mu^2.
ChannelStats pooled_channel_stats(const Tensor& h, double epsilon);

class PNormLayer {
public:
    PNormLayer() = default;
    PNormLayer(int channels, int num_labels, PNormOptions options, Rng* rng);

    /// `style` is the N×(3·s)×H×W semantic style map at h's resolution;
    /// `noise` (optional) is N×1×H×W and is scaled per channel before normalizing.
    ag::Var forward(const ag::Var& h, const Tensor& style, const Tensor* noise) const;

    /// Convenience overload that builds the style map from palettes and masks.
    ag::Var forward(const ag::Var& h, std::span<const PaletteVector> palettes, std::span<const SegmentationMask> masks,
                    const Tensor* noise) const;

    /// (gamma, beta) predicted from a style map.
    std::pair<ag::Var, ag::Var> modulation(const Tensor& style) const;

    void collect(ParamList& out, const std::string& prefix) const;

    int channels() const { return channels_; }
    int num_labels() const { return num_labels_; }
    double epsilon() const { return options_.epsilon; }

    Conv2d shared;
    Conv2d gamma;
    Conv2d beta;
    ag::Var noise_scale;

private:
    int channels_ = 0;
    int num_labels_ = 0;
    PNormOptions options_;
};

/// Three (P-Norm, leaky-ReLU, 3×3 conv) stages on the main path plus a shortcut
/// (identity, or a learned 1×1 conv when the channel count changes).
class PNormResBlk {
public:
    PNormResBlk() = default;
    PNormResBlk(int in_channels, int out_channels, int num_labels, PNormOptions options, Rng* rng);

    /// Fresh N×1×H×W noise is drawn for each P-Norm layer when `noise_rng` is non-null.
    ag::Var forward(const ag::Var& h, const Tensor& style, Rng* noise_rng) const;

    void collect(ParamList& out, const std::string& prefix) const;

    PNormLayer norm1, norm2, norm3;
    Conv2d conv1, conv2, conv3;
    std::optional<Conv2d> shortcut;
};

}  // namespace rucgan
