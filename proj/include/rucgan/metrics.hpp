// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Evaluation metrics.
//
// SR (style relevance) is defined here as the per-position cosine similarity
// of the backbone's two shallowest feature maps, averaged over positions and
// then over the two layers. Scores are comparable only between runs that use
// the same backbone.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rucgan/objectives.hpp"
#include "rucgan/palette.hpp"

namespace rucgan {

/// SR in [-1, 1]. Positions where both feature vectors vanish count as 1,
/// where exactly one vanishes as 0.
double style_relevance(const Tensor& synth, const Tensor& gt, const PerceptualBackbone* backbone);

/// n×d row-major embedding matrix.
class EmbeddingSet {
public:
    EmbeddingSet(int n, int d, std::vector<double> values, std::string source = {});

    int size() const { return n_; }
    int dim() const { return d_; }
    const std::vector<double>& values() const { return values_; }
    const std::string& source() const { return source_; }
    double at(int i, int j) const { return values_[static_cast<std::size_t>(i) * d_ + j]; }

private:
    int n_;
    int d_;
    std::vector<double> values_;
    std::string source_;
};

/// ‖μa−μb‖² + tr(Σa + Σb − 2(Σa Σb)^½) with unbiased covariances.
double frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b);

/// Image → embedding vector (one per image).
class ImageEmbedder {
public:
    virtual ~ImageEmbedder() = default;
    virtual std::vector<double> embed(const Tensor& image) const = 0;
    virtual std::string name() const = 0;
};

/// Spatial means of every backbone layer, concatenated.
class BackboneEmbedder final : public ImageEmbedder {
public:
    explicit BackboneEmbedder(std::shared_ptr<const PerceptualBackbone> backbone);
    std::vector<double> embed(const Tensor& image) const override;
    std::string name() const override { return "pooled:" + backbone_->name(); }

private:
    std::shared_ptr<const PerceptualBackbone> backbone_;
};

EmbeddingSet embed_images(std::span<const Tensor> images, const ImageEmbedder& embedder);

class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int num_labels);

    void add(const SegmentationMask& pred, const SegmentationMask& gt);
    void merge(const ConfusionMatrix& other);

    int num_labels() const { return s_; }
    std::int64_t count(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt) * s_ + pred]; }
    std::int64_t total() const { return total_; }

    /// Mean IoU over labels with nonzero union (0 when there are none).
    double mean_iou() const;
    double pixel_accuracy() const;

private:
    int s_;
    std::vector<std::int64_t> counts_;
    std::int64_t total_ = 0;
};

struct SegmentationScores {
    double miou = 0;
    double accuracy = 0;
};

SegmentationScores segmentation_scores(std::span<const SegmentationMask> pred, std::span<const SegmentationMask> gt,
                                       int num_labels);

/// Externally supplied perceptual distance (LPIPS or a stand-in).
class ExternalScorer {
public:
    virtual ~ExternalScorer() = default;
    virtual double score(const Tensor& x, const Tensor& y) const = 0;
    virtual std::string provenance() const = 0;
};

/// Runs `command X.png Y.png` and parses a number from its stdout.
class CommandScorer final : public ExternalScorer {
public:
    explicit CommandScorer(std::string command);
    double score(const Tensor& x, const Tensor& y) const override;
    std::string provenance() const override { return "command:" + command_; }

private:
    std::string command_;
};

struct ScorerResult {
    std::optional<double> value;  // empty = unavailable
    std::string provenance;
    std::string reason;
};

ScorerResult lpips_adapter(const Tensor& x, const Tensor& y, const ExternalScorer* scorer);

/// Image → label mask.
class Segmenter {
public:
    virtual ~Segmenter() = default;
    virtual SegmentationMask segment(const Tensor& image, int num_labels) const = 0;
    virtual std::string name() const = 0;
};

/// Runs `command IN.png OUT.png`; OUT must be a label-indexed mask PNG.
class CommandSegmenter final : public Segmenter {
public:
    explicit CommandSegmenter(std::string command);
    SegmentationMask segment(const Tensor& image, int num_labels) const override;
    std::string name() const override { return "command:" + command_; }

private:
    std::string command_;
};

struct EvaluationReport {
    std::optional<double> fid;
    std::optional<double> lpips;
    std::optional<double> sr;
    std::optional<double> miou;
    std::optional<double> acc;
    int n_images = 0;
    std::vector<std::pair<std::string, std::string>> provenance;

    /// Missing metrics are written as the string "unavailable".
    nlohmann::json to_json() const;
};

struct EvaluationInputs {
    std::shared_ptr<const PerceptualBackbone> backbone;  // SR; required
    const ImageEmbedder* embedder = nullptr;             // FID; optional
    const ExternalScorer* lpips = nullptr;               // optional
    const Segmenter* segmenter = nullptr;                // mIoU/acc; optional
};

using Synthesizer = std::function<Tensor(const SegmentationMask&, const PaletteVector&)>;

/// Synthesizes every sample from its own mask and palette and scores the
/// results against the originals.
EvaluationReport evaluate(std::span<const Tensor> images, std::span<const SegmentationMask> masks,
                          const Synthesizer& synthesize, const EvaluationInputs& inputs);

}  // namespace rucgan
