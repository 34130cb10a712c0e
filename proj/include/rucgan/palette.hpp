// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-label color palettes: extraction from images, the named color bank, and
// the semantic style map that broadcasts palette colors into mask regions.
//
// Colors are stored in [-1, 1] per channel, the same range as generator
// images. Bank colors are integers in [0, 255] and convert with x/127.5 - 1.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rucgan/tensor.hpp"

namespace rucgan {

/// H×W grid of label indices, each in [0, num_labels).
class SegmentationMask {
public:
    SegmentationMask() = default;
    /// Constant-label mask.
    SegmentationMask(int height, int width, int num_labels, int fill = 0);
    SegmentationMask(int height, int width, int num_labels, std::vector<std::int32_t> labels);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int num_labels() const noexcept { return num_labels_; }

    int at(int y, int x) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
    void set(int y, int x, int label);
    std::span<const std::int32_t> labels() const noexcept { return labels_; }

    /// Labels that occur at least once, ascending.
    std::vector<int> present_labels() const;

    bool operator==(const SegmentationMask&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    int num_labels_ = 0;
    std::vector<std::int32_t> labels_;
};

using Rgb = std::array<double, 3>;
using Rgb8 = std::array<int, 3>;

/// One representative color per label plus a flag for labels seen in the source.
struct PaletteVector {
    std::vector<Rgb> colors;
    std::vector<bool> present;

    PaletteVector() = default;
    explicit PaletteVector(int num_labels) : colors(static_cast<std::size_t>(num_labels), Rgb{0, 0, 0}),
                                             present(static_cast<std::size_t>(num_labels), false) {}

    int num_labels() const noexcept { return static_cast<int>(colors.size()); }
    bool operator==(const PaletteVector&) const = default;
};

struct ColorBankEntry {
    std::string name;
    Rgb8 rgb;
};

struct ColorBank {
    std::vector<ColorBankEntry> entries;

    std::optional<Rgb8> find(std::string_view name) const;
};

/// Throws DimensionError unless `image` is 3×H×W.
void require_image(const Tensor& image, const char* what);

/// Per-label mean color of `image` (3×H×W, [-1, 1]) over each mask region.
/// Absent labels get (0, 0, 0) with present = false.
PaletteVector extract_palette(const Tensor& image, const SegmentationMask& mask);

/// (3·s)×H×W planes: block l holds palette[l] where mask == l, zero elsewhere.
Tensor semantic_sampling(const PaletteVector& palette, const SegmentationMask& mask);

/// Batched semantic_sampling: N×(3·s)×H×W.
Tensor semantic_sampling_batch(std::span<const PaletteVector> palettes, std::span<const SegmentationMask> masks);

/// 3×H×W image with pixel = palette[mask[y, x]].
Tensor paint_by_palette(const PaletteVector& palette, const SegmentationMask& mask);

/// Nearest-neighbor subsampling keeping the top-left cell of each factor×factor block.
SegmentationMask downsample_mask(const SegmentationMask& mask, int factor);

/// Fixed bank of named colors spanning the hue wheel plus neutrals.
ColorBank default_color_bank();

Rgb bank_to_unit(const Rgb8& rgb);
Rgb8 unit_to_bank(const Rgb& rgb);

// JSON: {"num_labels": s, "colors": [[r,g,b],...], "present": [bool,...]}
nlohmann::json palette_to_json(const PaletteVector& palette);
PaletteVector palette_from_json(const nlohmann::json& j);
PaletteVector load_palette(const std::string& path);
void save_palette(const PaletteVector& palette, const std::string& path);

// JSON: [{"name": str, "rgb": [int,int,int]}]
nlohmann::json color_bank_to_json(const ColorBank& bank);
ColorBank color_bank_from_json(const nlohmann::json& j);

}  // namespace rucgan
