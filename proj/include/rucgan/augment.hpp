// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training-time color augmentation: hue-only jitter and semantic color mix.
//
// Semantic color mix keeps the original pixels on a random half of the labels
// present in the mask and replaces the rest with a hue-jittered copy:
//
//     mixed = X * M + jitter(X) * (1 - M)
//
// where M is the indicator of the selected labels. It is a partition, never a
// blend: each pixel is copied from exactly one of the two sources.

#pragma once

#include <cstdint>
#include <vector>

#include "rucgan/palette.hpp"
#include "rucgan/rng.hpp"
#include "rucgan/tensor.hpp"

namespace rucgan {

inline constexpr double kMaxHueShift = 0.5;

struct MixSelection {
    std::vector<int> selected;          // ascending label ids
    std::vector<std::uint8_t> indicator;  // H×W, 1 where mask ∈ selected
    int height = 0;
    int width = 0;

    bool keeps(int y, int x) const { return indicator[static_cast<std::size_t>(y) * width + x] != 0; }
};

struct MixResult {
    Tensor mixed;
    double delta = 0.0;
    MixSelection selection;
};

/// Rotates hue by `delta` (fraction of the wheel, in [-0.5, 0.5]); saturation
/// and value are preserved. Gray pixels and delta == 0 pass through bitwise.
Tensor hue_jitter(const Tensor& image, double delta);

/// Uniformly picks floor(L/2) of the L labels present in the mask.
MixSelection select_labels(const SegmentationMask& mask, Rng& rng);

/// Indicator for an explicit label set.
MixSelection make_selection(const SegmentationMask& mask, std::vector<int> selected);

/// Applies the partition: selected pixels from `original`, the rest from `jittered`.
Tensor apply_color_mix(const Tensor& original, const Tensor& jittered, const MixSelection& selection);

/// Draws a selection, then delta ~ U[-0.5, 0.5], and mixes.
MixResult semantic_color_mix(const Tensor& image, const SegmentationMask& mask, Rng& rng);

// HSV helpers on [0, 1] channels; exposed for tests.
struct Hsv {
    double h, s, v;
};
Hsv rgb_to_hsv(double r, double g, double b);
void hsv_to_rgb(const Hsv& hsv, double& r, double& g, double& b);

}  // namespace rucgan
