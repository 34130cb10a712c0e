// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "rucgan/metrics.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <unistd.h>

#include "rucgan/dataio.hpp"
#include "rucgan/error.hpp"

namespace rucgan {

namespace fs = std::filesystem;

namespace {

ag::Var as_batch(const Tensor& image) {
    require_image(image, "metrics");
    return ag::Var(image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)}));
}

double cosine_map_mean(const Tensor& a, const Tensor& b) {
    const int c = a.dim(1), hw = a.dim(2) * a.dim(3);
    double total = 0.0;
    for (int p = 0; p < hw; ++p) {
        double dot = 0, na = 0, nb = 0;
        for (int k = 0; k < c; ++k) {
            const double x = a[static_cast<std::size_t>(k) * hw + p];
            const double y = b[static_cast<std::size_t>(k) * hw + p];
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
        if (na == 0.0 && nb == 0.0) {
            total += 1.0;
        } else if (na > 0.0 && nb > 0.0) {
            total += std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
        }
    }
    return total / hw;
}

// Unique scratch directory for plugin exchange files.
class ScratchDir {
public:
    ScratchDir() {
        static std::atomic<long> counter{0};
        path_ = fs::temp_directory_path() /
                ("rucgan-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
        fs::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::string quote(const fs::path& p) {
    std::string out = "'";
    for (char ch : p.string()) {
        out += ch == '\'' ? std::string("'\\''") : std::string(1, ch);
    }
    return out + "'";
}

std::string run_capture(const std::string& cmd, int& status) {
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) {
        throw Error("cannot start plugin: " + cmd);
    }
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) {
        out.append(buf, n);
    }
    status = ::pclose(pipe);
    return out;
}

}  // namespace

double style_relevance(const Tensor& synth, const Tensor& gt, const PerceptualBackbone* backbone) {
    if (!backbone) {
        throw ConfigurationError("style relevance requires a backbone");
    }
    require_same_shape(synth, gt, "style_relevance");
    ag::NoGradGuard no_grad;
    const auto fa = backbone->features(as_batch(synth));
    const auto fb = backbone->features(as_batch(gt));
    const std::size_t layers = std::min<std::size_t>(2, fa.size());
    double total = 0.0;
    for (std::size_t l = 0; l < layers; ++l) {
        total += cosine_map_mean(fa[l].value(), fb[l].value());
    }
    return total / static_cast<double>(layers);
}

EmbeddingSet::EmbeddingSet(int n, int d, std::vector<double> values, std::string source)
    : n_(n), d_(d), values_(std::move(values)), source_(std::move(source)) {
    if (n < 2) {
        throw DimensionError("embedding set needs at least 2 vectors, got " + std::to_string(n));
    }
    if (d < 1) {
        throw DimensionError("embedding dimension must be >= 1");
    }
    if (values_.size() != static_cast<std::size_t>(n) * d) {
        throw DimensionError("embedding set: " + std::to_string(values_.size()) + " values for " +
                             std::to_string(n) + "x" + std::to_string(d));
    }
}

namespace {

void moments(const EmbeddingSet& s, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
        s.values().data(), s.size(), s.dim());
    mu = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
    cov = (centered.transpose() * centered) / static_cast<double>(s.size() - 1);
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b) {
    if (a.dim() != b.dim()) {
        throw DimensionError("frechet_distance: dimensions " + std::to_string(a.dim()) + " and " +
                             std::to_string(b.dim()));
    }
    Eigen::VectorXd mu_a, mu_b;
    Eigen::MatrixXd cov_a, cov_b;
    moments(a, mu_a, cov_a);
    moments(b, mu_b, cov_b);
    // tr((Σa Σb)^½) = tr((Σa^½ Σb Σa^½)^½); the inner product is symmetric PSD.
    const Eigen::MatrixXd ra = psd_sqrt(cov_a);
    const Eigen::MatrixXd inner = ra * cov_b * ra;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
    const double tr_root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    const double dist = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_root;
    return std::max(dist, 0.0);
}

BackboneEmbedder::BackboneEmbedder(std::shared_ptr<const PerceptualBackbone> backbone)
    : backbone_(std::move(backbone)) {
    if (!backbone_) {
        throw ConfigurationError("embedder requires a backbone");
    }
}

std::vector<double> BackboneEmbedder::embed(const Tensor& image) const {
    ag::NoGradGuard no_grad;
    std::vector<double> out;
    for (const auto& f : backbone_->features(as_batch(image))) {
        const Tensor& t = f.value();
        const int c = t.dim(1);
        const std::size_t hw = static_cast<std::size_t>(t.dim(2)) * t.dim(3);
        for (int k = 0; k < c; ++k) {
            double sum = 0.0;
            for (std::size_t p = 0; p < hw; ++p) {
                sum += t[k * hw + p];
            }
            out.push_back(sum / static_cast<double>(hw));
        }
    }
    return out;
}

EmbeddingSet embed_images(std::span<const Tensor> images, const ImageEmbedder& embedder) {
    std::vector<double> values;
    int d = 0;
    for (const auto& img : images) {
        const auto v = embedder.embed(img);
        if (d == 0) {
            d = static_cast<int>(v.size());
        } else if (static_cast<int>(v.size()) != d) {
            throw DimensionError("embedder returned vectors of differing length");
        }
        values.insert(values.end(), v.begin(), v.end());
    }
    return EmbeddingSet(static_cast<int>(images.size()), d, std::move(values), embedder.name());
}

ConfusionMatrix::ConfusionMatrix(int num_labels) : s_(num_labels) {
    if (num_labels < 1) {
        throw ParameterError("confusion matrix needs at least one label");
    }
    counts_.assign(static_cast<std::size_t>(s_) * s_, 0);
}

void ConfusionMatrix::add(const SegmentationMask& pred, const SegmentationMask& gt) {
    if (pred.height() != gt.height() || pred.width() != gt.width()) {
        throw DimensionError("segmentation scores: prediction and ground truth sizes differ");
    }
    const auto p = pred.labels();
    const auto g = gt.labels();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0 || p[i] >= s_ || g[i] < 0 || g[i] >= s_) {
            throw LabelRangeError("segmentation scores: label outside [0, " + std::to_string(s_) + ")");
        }
        ++counts_[static_cast<std::size_t>(g[i]) * s_ + p[i]];
    }
    total_ += static_cast<std::int64_t>(p.size());
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.s_ != s_) {
        throw DimensionError("cannot merge confusion matrices of different label counts");
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        counts_[i] += other.counts_[i];
    }
    total_ += other.total_;
}

double ConfusionMatrix::mean_iou() const {
    double sum = 0.0;
    int used = 0;
    for (int l = 0; l < s_; ++l) {
        std::int64_t row = 0, col = 0;
        for (int k = 0; k < s_; ++k) {
            row += count(l, k);
            col += count(k, l);
        }
        const std::int64_t tp = count(l, l);
        const std::int64_t uni = row + col - tp;
        if (uni > 0) {
            sum += static_cast<double>(tp) / static_cast<double>(uni);
            ++used;
        }
    }
    return used ? sum / used : 0.0;
}

double ConfusionMatrix::pixel_accuracy() const {
    if (total_ == 0) {
        return 0.0;
    }
    std::int64_t diag = 0;
    for (int l = 0; l < s_; ++l) {
        diag += count(l, l);
    }
    return static_cast<double>(diag) / static_cast<double>(total_);
}

SegmentationScores segmentation_scores(std::span<const SegmentationMask> pred, std::span<const SegmentationMask> gt,
                                       int num_labels) {
    if (pred.size() != gt.size()) {
        throw DimensionError("segmentation scores: " + std::to_string(pred.size()) + " predictions for " +
                             std::to_string(gt.size()) + " ground-truth masks");
    }
    ConfusionMatrix cm(num_labels);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        cm.add(pred[i], gt[i]);
    }
    return {cm.mean_iou(), cm.pixel_accuracy()};
}

CommandScorer::CommandScorer(std::string command) : command_(std::move(command)) {
    if (command_.empty()) {
        throw ConfigurationError("empty scorer command");
    }
}

double CommandScorer::score(const Tensor& x, const Tensor& y) const {
    ScratchDir dir;
    write_image_png(dir.path() / "x.png", x);
    write_image_png(dir.path() / "y.png", y);
    int status = 0;
    const std::string out =
        run_capture(command_ + " " + quote(dir.path() / "x.png") + " " + quote(dir.path() / "y.png"), status);
    if (status != 0) {
        throw Error("scorer command failed with status " + std::to_string(status));
    }
    std::istringstream is(out);
    double v = 0;
    if (!(is >> v) || !std::isfinite(v)) {
        throw Error("scorer command printed no number: '" + out + "'");
    }
    return v;
}

ScorerResult lpips_adapter(const Tensor& x, const Tensor& y, const ExternalScorer* scorer) {
    if (!scorer) {
        return {std::nullopt, "none", "no LPIPS scorer configured"};
    }
    require_same_shape(x, y, "lpips_adapter");
    try {
        return {scorer->score(x, y), scorer->provenance(), {}};
    } catch (const std::exception& e) {
        return {std::nullopt, scorer->provenance(), e.what()};
    }
}

CommandSegmenter::CommandSegmenter(std::string command) : command_(std::move(command)) {
    if (command_.empty()) {
        throw ConfigurationError("empty segmenter command");
    }
}

SegmentationMask CommandSegmenter::segment(const Tensor& image, int num_labels) const {
    ScratchDir dir;
    const fs::path in = dir.path() / "in.png", out = dir.path() / "out.png";
    write_image_png(in, image);
    int status = 0;
    const std::string log = run_capture(command_ + " " + quote(in) + " " + quote(out), status);
    if (status != 0) {
        throw Error("segmenter command failed with status " + std::to_string(status) + ": " + log);
    }
    return read_mask_png(out, num_labels);
}

nlohmann::json EvaluationReport::to_json() const {
    const auto field = [](const std::optional<double>& v) -> nlohmann::json {
        return v ? nlohmann::json(*v) : nlohmann::json("unavailable");
    };
    nlohmann::json prov = nlohmann::json::object();
    for (const auto& [k, v] : provenance) {
        prov[k] = v;
    }
    return {{"fid", field(fid)},   {"lpips", field(lpips)}, {"sr", field(sr)},
            {"miou", field(miou)}, {"acc", field(acc)},     {"n_images", n_images},
            {"scorer_provenance", prov}};
}

EvaluationReport evaluate(std::span<const Tensor> images, std::span<const SegmentationMask> masks,
                          const Synthesizer& synthesize, const EvaluationInputs& inputs) {
    if (images.size() != masks.size()) {
        throw DimensionError("evaluate: image and mask counts differ");
    }
    if (images.empty()) {
        throw DimensionError("evaluate: no images");
    }
    EvaluationReport report;
    report.n_images = static_cast<int>(images.size());

    std::vector<Tensor> synth;
    for (std::size_t i = 0; i < images.size(); ++i) {
        synth.push_back(synthesize(masks[i], extract_palette(images[i], masks[i])));
        require_same_shape(synth.back(), images[i], "evaluate");
    }

    if (inputs.backbone) {
        double sr = 0.0;
        for (std::size_t i = 0; i < images.size(); ++i) {
            sr += style_relevance(synth[i], images[i], inputs.backbone.get());
        }
        report.sr = sr / static_cast<double>(images.size());
        report.provenance.emplace_back("sr", inputs.backbone->name());
    } else {
        report.provenance.emplace_back("sr", "unavailable: no backbone");
    }

    if (inputs.embedder && images.size() >= 2) {
        report.fid = frechet_distance(embed_images(images, *inputs.embedder), embed_images(synth, *inputs.embedder));
        report.provenance.emplace_back("fid", inputs.embedder->name());
    } else {
        report.provenance.emplace_back("fid", inputs.embedder ? "unavailable: fewer than 2 images"
                                                              : "unavailable: no embedder");
    }

    if (inputs.lpips) {
        double sum = 0.0;
        bool ok = true;
        std::string reason;
        for (std::size_t i = 0; i < images.size() && ok; ++i) {
            const ScorerResult r = lpips_adapter(synth[i], images[i], inputs.lpips);
            ok = r.value.has_value();
            sum += r.value.value_or(0.0);
            reason = r.reason;
        }
        if (ok) {
            report.lpips = sum / static_cast<double>(images.size());
            report.provenance.emplace_back("lpips", inputs.lpips->provenance());
        } else {
            report.provenance.emplace_back("lpips", "unavailable: " + reason);
        }
    } else {
        report.provenance.emplace_back("lpips", "unavailable: no LPIPS scorer configured");
    }

    if (inputs.segmenter) {
        ConfusionMatrix cm(masks.front().num_labels());
        for (std::size_t i = 0; i < synth.size(); ++i) {
            cm.add(inputs.segmenter->segment(synth[i], masks[i].num_labels()), masks[i]);
        }
        report.miou = cm.mean_iou();
        report.acc = cm.pixel_accuracy();
        report.provenance.emplace_back("segmentation", inputs.segmenter->name());
    } else {
        report.provenance.emplace_back("segmentation", "unavailable: no segmenter configured");
    }
    return report;
}

}  // namespace rucgan
