// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rucgan/autograd.hpp"
#include "rucgan/rng.hpp"

namespace rucgan {

using ParamList = std::vector<std::pair<std::string, ag::Var>>;
/// Non-learned state that must survive checkpointing (spectral-norm vectors).
using BufferList = std::vector<std::pair<std::string, Tensor*>>;

/// Total learnable scalar count. Works on unmaterialized parameters.
std::size_t count_parameters(const ParamList& params);

/// Every parameter tensor is initialized from `rng` when given; with a null
/// rng the layer is built shape-only (no storage) for parameter counting.
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, bool bias, Rng* rng);

    ag::Var forward(const ag::Var& x) const;
    /// Forward with an externally supplied weight (spectral normalization).
    ag::Var forward_with(const ag::Var& x, const ag::Var& weight) const;

    void collect(ParamList& out, const std::string& prefix) const;

    int in_channels() const { return weight.value().dim(1); }
    int out_channels() const { return weight.value().dim(0); }

    ag::Var weight;
    std::optional<ag::Var> bias;
    kernels::ConvGeometry geometry;
};

/// Convolution whose weight is divided by its largest singular value,
/// estimated by power iteration on persistent vectors u and v.
class SpectralConv2d {
public:
    SpectralConv2d() = default;
    SpectralConv2d(int in_channels, int out_channels, int kernel, int stride, int pad, Rng* rng,
                   int warmup_iterations = 20);

    /// One power-iteration step updates u and v when `update` is true.
    ag::Var forward(const ag::Var& x, bool update);
    /// The normalized weight for the current u, v (no update).
    Tensor normalized_weight() const;
    void power_iteration(int steps);

    void collect(ParamList& out, const std::string& prefix) const;
    void collect_buffers(BufferList& out, const std::string& prefix);

    Conv2d conv;
    Tensor u;
    Tensor v;
};

}  // namespace rucgan
