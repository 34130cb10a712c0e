// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Adversarial training with the two time-scale update rule.
//
// Each step: optionally replace every image by its semantic color mix, take
// the palette from that same (possibly jittered) image, update D once on
// hinge loss with G frozen, then update G once on the weighted total loss
// with D frozen. The image the palette came from is also the reconstruction
// target, which is what ties palette colors to output colors.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rucgan/dataio.hpp"
#include "rucgan/models.hpp"
#include "rucgan/objectives.hpp"
#include "rucgan/optim.hpp"

namespace rucgan {

struct TrainConfig {
    double lr_g = 0.0001;
    double lr_d = 0.0004;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    int batch_size = 1;
    long max_steps = 1000;
    bool scm_enabled = true;
    long checkpoint_every = 0;  // 0 = only at the end
    int image_size = 256;
    int num_labels = 19;

    // Model and run settings (beyond the optimizer schedule).
    std::vector<int> stage_channels{1024, 1024, 512, 256, 128, 64};
    int pnorm_hidden = 128;
    int disc_base_channels = 64;
    int disc_num_scales = 2;
    double lambda1 = 10.0;
    double lambda2 = 10.0;
    std::string backbone = "random:7";
    std::string manifest;
    std::string output_dir = "run";
    std::uint64_t seed = kDefaultSeed;

    void validate() const;
    GeneratorConfig generator_config() const;
    DiscriminatorConfig discriminator_config() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Flat `key = value` file; '#' starts a comment. Unknown keys are rejected.
TrainConfig parse_train_config(const std::filesystem::path& path);
TrainConfig parse_train_config_text(const std::string& text);
std::string format_train_config(const TrainConfig& c);

struct TrainState {
    TrainConfig config;
    Generator generator;
    Discriminator discriminator;
    Adam opt_g;
    Adam opt_d;
    Rng rng;
    long step = 0;
    std::shared_ptr<const PerceptualBackbone> backbone;

    /// Fresh state: weights from `config.seed`, random stream seeded likewise.
    static std::unique_ptr<TrainState> create(const TrainConfig& config,
                                              std::shared_ptr<const PerceptualBackbone> backbone);
};

struct StepRecord {
    long step = 0;
    double loss_d = 0;
    double loss_g = 0;
    double loss_percept = 0;
    double loss_fm = 0;
    double loss_adv = 0;
    std::vector<double> scm_delta;
    std::vector<std::vector<int>> scm_labels;
    /// Palettes fed to G this step (for self-consistency checks).
    std::vector<PaletteVector> palettes;
    /// Reconstruction targets (the possibly jittered images), N×3×H×W.
    Tensor targets;

    nlohmann::json to_json() const;
};

/// One D update then one G update. Throws NonFiniteError on NaN/Inf losses.
StepRecord train_step(TrainState& state, std::span<const Sample> batch);

/// The pieces of train_step, exposed so each sub-step can be checked alone.
struct PreparedBatch {
    std::vector<SegmentationMask> masks;
    Tensor planes;  // N×s×H×W one-hot
};

/// Applies color mix (when enabled) and extracts palettes into `record`.
PreparedBatch prepare_batch(TrainState& state, std::span<const Sample> batch, StepRecord& record);
/// Hinge update of D against a detached G output; fills record.loss_d.
void discriminator_step(TrainState& state, const PreparedBatch& batch, StepRecord& record);
/// Update of G with D frozen; fills the generator loss fields.
void generator_step(TrainState& state, const PreparedBatch& batch, StepRecord& record);

/// Batch for a given step: samples cycled in order, `batch_size` at a time.
std::vector<Sample> batch_for_step(std::span<const Sample> dataset, long step, int batch_size);

/// Runs until state.step == config.max_steps, writing JSON-lines records to
/// `log` and checkpoints to `checkpoint_dir` (when non-empty).
void run_training(TrainState& state, std::span<const Sample> dataset, std::ostream* log,
                  const std::filesystem::path& checkpoint_dir);

/// Mean |G(palette(X), M) - X| with noise disabled.
double reconstruction_l1(const Generator& generator, std::span<const Sample> samples);

inline constexpr const char* kCheckpointMagic = "RUCGAN-CKPT-1";

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);

/// Loads a checkpoint. When `expected` is given, num_labels and image_size
/// must match it (ConfigurationError otherwise); the stored config is used.
std::unique_ptr<TrainState> load_checkpoint(const std::filesystem::path& path, const TrainConfig* expected,
                                            std::shared_ptr<const PerceptualBackbone> backbone = nullptr);

/// Generator-only load for inference (server, synthesize, evaluate).
Generator load_generator(const std::filesystem::path& path);

/// 64-bit hash of all parameter values (for before/after comparisons).
std::uint64_t hash_parameters(const ParamList& params);

}  // namespace rucgan
