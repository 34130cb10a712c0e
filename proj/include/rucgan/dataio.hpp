// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset ingestion: PNG codecs, resizing, one-hot encoding and manifests.
//
// Masks are 8-bit single-channel PNGs whose pixel values are label indices
// directly (no color coding). Images are RGB PNGs mapped to [-1, 1] with
// x/127.5 - 1. Images resize bilinearly; masks resize nearest-neighbor so
// labels are never blended.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rucgan/palette.hpp"
#include "rucgan/rng.hpp"
#include "rucgan/tensor.hpp"

namespace rucgan {

using Bytes = std::vector<std::uint8_t>;

// ---- one-hot ----------------------------------------------------------------

/// s×H×W indicator planes; channel l is 1 where mask == l.
Tensor one_hot(const SegmentationMask& mask, int num_labels);
/// N×s×H×W for equally sized masks.
Tensor one_hot_batch(std::span<const SegmentationMask> masks);
/// Inverse of one_hot: per-pixel argmax over channels (first max wins).
SegmentationMask argmax_labels(const Tensor& planes);

// ---- codecs -----------------------------------------------------------------

Bytes encode_image_png(const Tensor& image);
Tensor decode_image_png(std::span<const std::uint8_t> png);
Bytes encode_mask_png(const SegmentationMask& mask);
/// Rejects color PNGs and values >= num_labels.
SegmentationMask decode_mask_png(std::span<const std::uint8_t> png, int num_labels);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

Tensor read_image_png(const std::filesystem::path& path);
void write_image_png(const std::filesystem::path& path, const Tensor& image);
SegmentationMask read_mask_png(const std::filesystem::path& path, int num_labels);
void write_mask_png(const std::filesystem::path& path, const SegmentationMask& mask);

// ---- resizing ---------------------------------------------------------------

/// Half-pixel-centered bilinear resize of a 3×H×W image.
Tensor resize_bilinear(const Tensor& image, int height, int width);
SegmentationMask resize_nearest(const SegmentationMask& mask, int height, int width);

// ---- manifests --------------------------------------------------------------

struct ManifestRecord {
    std::filesystem::path image;
    std::filesystem::path mask;
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;  // paths resolved against the manifest directory
    int num_labels = 0;
    std::string split = "train";
    int image_size = 0;
};

/// Reads a JSON-lines manifest (`{"image": ..., "mask": ...}` per line).
/// Verifies that every referenced file exists.
DatasetManifest load_manifest(const std::filesystem::path& path, int num_labels, int image_size,
                              std::string split = "train");

struct Sample {
    Tensor image;  // 3×size×size in [-1, 1]
    SegmentationMask mask;
};

Sample load_sample(const ManifestRecord& record, int image_size, int num_labels);
std::vector<Sample> load_dataset(const DatasetManifest& manifest);

// ---- label table ------------------------------------------------------------

struct LabelInfo {
    int id = 0;
    std::string name;
    Rgb8 color{};
};

/// Label colormap JSON: [{"id": int, "name": str, "color": [r,g,b]}].
std::vector<LabelInfo> load_label_table(const std::filesystem::path& path);
void save_label_table(const std::filesystem::path& path, const std::vector<LabelInfo>& labels);
std::vector<LabelInfo> default_label_table(int num_labels);

// ---- synthetic data ---------------------------------------------------------

/// Procedural scenes: sky/ground split with a random horizon, a disc and a
/// band, each region filled with a distinct base color plus a soft gradient.
std::vector<Sample> make_toy_samples(int count, int size, int num_labels, Rng& rng);

/// Writes make_toy_samples to `dir` as PNGs plus manifest.jsonl and labels.json.
/// Returns the manifest path.
std::filesystem::path write_toy_dataset(const std::filesystem::path& dir, int count, int size, int num_labels,
                                        std::uint64_t seed);

}  // namespace rucgan
