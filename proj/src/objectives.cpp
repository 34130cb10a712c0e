// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "rucgan/objectives.hpp"

#include "rucgan/archive.hpp"
#include "rucgan/error.hpp"

namespace rucgan {

ConvBackbone::ConvBackbone(std::uint64_t seed, std::vector<int> widths) : name_("random:" + std::to_string(seed)) {
    Rng rng(seed);
    int in = 3;
    for (int w : widths) {
        Conv2d conv(in, w, 3, 1, 1, true, &rng);
        // Frozen: rebuild as constants so no gradient is accumulated into them.
        conv.weight = ag::Var(conv.weight.value(), false);
        conv.bias = ag::Var(conv.bias->value(), false);
        stages_.push_back(std::move(conv));
        in = w;
    }
}

ConvBackbone ConvBackbone::load(const std::filesystem::path& path) {
    const TensorArchive archive = read_archive(path, kMagic);
    ConvBackbone b;
    b.name_ = "file:" + path.string();
    const int n = archive.header.value("num_layers", 0);
    if (n < 1) {
        throw ConfigurationError("backbone archive declares no layers");
    }
    for (int i = 0; i < n; ++i) {
        Conv2d conv;
        conv.geometry = {1, 1};
        conv.weight = ag::Var(archive.get("layer" + std::to_string(i) + ".weight"), false);
        conv.bias = ag::Var(archive.get("layer" + std::to_string(i) + ".bias"), false);
        if (i > 0 && conv.in_channels() != b.stages_.back().out_channels()) {
            throw ConfigurationError("backbone layer " + std::to_string(i) + " channel mismatch");
        }
        b.stages_.push_back(std::move(conv));
    }
    if (b.stages_.front().in_channels() != 3) {
        throw ConfigurationError("backbone must consume RGB input");
    }
    return b;
}

void ConvBackbone::save(const std::filesystem::path& path) const {
    TensorArchive archive;
    archive.magic = kMagic;
    archive.header = {{"num_layers", num_layers()}, {"name", name_}};
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        archive.tensors.emplace_back("layer" + std::to_string(i) + ".weight", stages_[i].weight.value());
        archive.tensors.emplace_back("layer" + std::to_string(i) + ".bias", stages_[i].bias->value());
    }
    write_archive(path, archive);
}

std::vector<ag::Var> ConvBackbone::features(const ag::Var& images) const {
    std::vector<ag::Var> out;
    ag::Var x = images;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        if (i > 0 && x.shape()[2] >= 2 && x.shape()[3] >= 2) {
            x = ag::avg_pool2x(x);
        }
        x = ag::leaky_relu(stages_[i].forward(x), 0.2);
        out.push_back(x);
    }
    return out;
}

std::shared_ptr<const PerceptualBackbone> make_backbone(const std::string& spec) {
    if (spec == "identity") {
        return std::make_shared<IdentityBackbone>();
    }
    if (spec == "random" || spec.rfind("random:", 0) == 0) {
        const std::uint64_t seed = spec.size() > 7 ? std::stoull(spec.substr(7)) : 7;
        return std::make_shared<ConvBackbone>(seed);
    }
    if (!std::filesystem::exists(spec)) {
        throw ConfigurationError("backbone '" + spec + "' is neither identity/random nor an existing file");
    }
    return std::make_shared<ConvBackbone>(ConvBackbone::load(spec));
}

ag::Var perceptual_loss(const ag::Var& x, const ag::Var& y, const PerceptualBackbone* backbone) {
    if (!backbone) {
        throw ConfigurationError("perceptual loss requires a backbone");
    }
    require_same_shape(x.value(), y.value(), "perceptual_loss");
    const auto fx = backbone->features(x);
    const auto fy = backbone->features(y);
    ag::Var total = ag::mean_abs_diff(fx[0], fy[0]);
    for (std::size_t i = 1; i < fx.size(); ++i) {
        total = ag::add(total, ag::mean_abs_diff(fx[i], fy[i]));
    }
    return ag::scale(total, 1.0 / static_cast<double>(fx.size()));
}

ag::Var feature_matching_loss(const std::vector<ag::Var>& real, const std::vector<ag::Var>& fake) {
    if (real.size() != fake.size() || real.empty()) {
        throw DimensionError("feature matching: " + std::to_string(real.size()) + " real vs " +
                             std::to_string(fake.size()) + " fake feature maps");
    }
    ag::Var total = ag::mean_abs_diff(fake[0], ag::detach(real[0]));
    for (std::size_t i = 1; i < real.size(); ++i) {
        total = ag::add(total, ag::mean_abs_diff(fake[i], ag::detach(real[i])));
    }
    return ag::scale(total, 1.0 / static_cast<double>(real.size()));
}

ag::Var hinge_d_loss(const std::vector<ag::Var>& real_logits, const std::vector<ag::Var>& fake_logits) {
    if (real_logits.size() != fake_logits.size() || real_logits.empty()) {
        throw DimensionError("hinge_d_loss: real and fake scale counts differ");
    }
    ag::Var total;
    for (std::size_t k = 0; k < real_logits.size(); ++k) {
        const ag::Var real_term = ag::mean(ag::relu(ag::add_scalar(ag::scale(real_logits[k], -1.0), 1.0)));
        const ag::Var fake_term = ag::mean(ag::relu(ag::add_scalar(fake_logits[k], 1.0)));
        const ag::Var scale_loss = ag::add(real_term, fake_term);
        total = total.defined() ? ag::add(total, scale_loss) : scale_loss;
    }
    return total;
}

ag::Var hinge_g_loss(const std::vector<ag::Var>& fake_logits) {
    if (fake_logits.empty()) {
        throw DimensionError("hinge_g_loss: no scales");
    }
    ag::Var total = ag::mean(fake_logits[0]);
    for (std::size_t k = 1; k < fake_logits.size(); ++k) {
        total = ag::add(total, ag::mean(fake_logits[k]));
    }
    return ag::scale(total, -1.0);
}

ag::Var total_g_loss(const GeneratorLossParts& parts, const LossWeights& weights) {
    if (weights.lambda1 < 0.0 || weights.lambda2 < 0.0) {
        throw ParameterError("loss weights must be non-negative");
    }
    if (parts.feature_matching.size() != parts.adversarial.size()) {
        throw DimensionError("total_g_loss: feature-matching and adversarial scale counts differ");
    }
    ag::Var total = ag::scale(parts.perceptual, weights.lambda1);
    for (std::size_t k = 0; k < parts.adversarial.size(); ++k) {
        total = ag::add(total, ag::add(ag::scale(parts.feature_matching[k], weights.lambda2), parts.adversarial[k]));
    }
    return total;
}

}  // namespace rucgan
