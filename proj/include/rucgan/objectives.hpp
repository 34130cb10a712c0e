// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training objectives.
//
//   perceptual   (1/N) Σ_i mean |φ_i(x) - φ_i(y)|          uniform over layers
//   feature match (1/N_k) Σ_i mean |D_i(real) - D_i(fake)|  per discriminator scale
//   hinge D      Σ_k mean max(0, 1 - D_k(real)) + mean max(0, 1 + D_k(fake))
//   hinge G      -Σ_k mean D_k(fake)
//   total G      λ1·percept + Σ_k (λ2·FM_k + adv_k)

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rucgan/models.hpp"
#include "rucgan/nn.hpp"

namespace rucgan {

/// Fixed feature extractor with ordered layers φ_1..φ_N. Implementations must
/// be deterministic and differentiable with respect to their input.
class PerceptualBackbone {
public:
    virtual ~PerceptualBackbone() = default;
    virtual std::vector<ag::Var> features(const ag::Var& images) const = 0;
    virtual int num_layers() const = 0;
    virtual std::string name() const = 0;
};

/// φ_1 = identity. Lets the losses and metrics be tested without weights.
class IdentityBackbone final : public PerceptualBackbone {
public:
    std::vector<ag::Var> features(const ag::Var& images) const override { return {images}; }
    int num_layers() const override { return 1; }
    std::string name() const override { return "identity"; }
};

/// Five conv stages (3×3 conv + leaky-ReLU, 2×2 average pooling between
/// stages). Weights are frozen: either loaded from an archive
/// ("RUCGAN-BACKBONE-1") or drawn from a fixed seed.
class ConvBackbone final : public PerceptualBackbone {
public:
    static constexpr const char* kMagic = "RUCGAN-BACKBONE-1";

    explicit ConvBackbone(std::uint64_t seed, std::vector<int> widths = {16, 32, 64, 64, 64});
    static ConvBackbone load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::vector<ag::Var> features(const ag::Var& images) const override;
    int num_layers() const override { return static_cast<int>(stages_.size()); }
    std::string name() const override { return name_; }

private:
    ConvBackbone() = default;
    std::vector<Conv2d> stages_;
    std::string name_;
};

/// "identity", "random[:seed]" or a path to a backbone archive.
std::shared_ptr<const PerceptualBackbone> make_backbone(const std::string& spec);

struct LossWeights {
    double lambda1 = 10.0;  // perceptual
    double lambda2 = 10.0;  // feature matching
};

/// Throws ConfigurationError when `backbone` is null.
ag::Var perceptual_loss(const ag::Var& x, const ag::Var& y, const PerceptualBackbone* backbone);

/// `real` entries are treated as constants.
ag::Var feature_matching_loss(const std::vector<ag::Var>& real, const std::vector<ag::Var>& fake);

ag::Var hinge_d_loss(const std::vector<ag::Var>& real_logits, const std::vector<ag::Var>& fake_logits);
ag::Var hinge_g_loss(const std::vector<ag::Var>& fake_logits);

struct GeneratorLossParts {
    ag::Var perceptual;
    std::vector<ag::Var> feature_matching;  // one per scale
    std::vector<ag::Var> adversarial;       // one per scale
};

ag::Var total_g_loss(const GeneratorLossParts& parts, const LossWeights& weights);

}  // namespace rucgan
