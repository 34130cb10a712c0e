// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for the unit tests and the acceptance suite.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rucgan/autograd.hpp"
#include "rucgan/palette.hpp"
#include "rucgan/rng.hpp"
#include "rucgan/tensor.hpp"

namespace rucgan::testing {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    return uniform_tensor(shape, rng, lo, hi);
}

inline SegmentationMask random_mask(int h, int w, int s, Rng& rng) {
    std::uniform_int_distribution<int> d(0, s - 1);
    std::vector<std::int32_t> labels(static_cast<std::size_t>(h) * w);
    for (auto& l : labels) {
        l = d(rng);
    }
    return SegmentationMask(h, w, s, std::move(labels));
}

inline PaletteVector random_palette(int s, Rng& rng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    PaletteVector p(s);
    for (int l = 0; l < s; ++l) {
        for (int c = 0; c < 3; ++c) {
            p.colors[static_cast<std::size_t>(l)][c] = d(rng);
        }
        p.present[static_cast<std::size_t>(l)] = true;
    }
    return p;
}

/// ‖a−n‖ / max(‖a‖, ‖n‖) over all elements, floored denominator.
inline double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
    double diff = 0, na = 0, nn = 0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
        na += analytic[i] * analytic[i];
        nn += numeric[i] * numeric[i];
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-10});
    return std::sqrt(diff) / denom;
}

/// Compares the backprop gradient of `loss()` w.r.t. `leaf` with central
/// differences. `leaf` must require grad; its value is perturbed in place.
inline double gradient_check(ag::Var& leaf, const std::function<ag::Var()>& loss, double h = 1e-6) {
    leaf.zero_grad();
    const ag::Var l = loss();
    ag::backward(l);
    const Tensor g = leaf.grad();
    std::vector<double> analytic(leaf.value().numel(), 0.0);
    if (!g.empty()) {
        std::copy(g.data().begin(), g.data().end(), analytic.begin());
    }
    std::vector<double> numeric(analytic.size());
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double orig = leaf.value()[i];
        leaf.mutable_value()[i] = orig + h;
        double fp, fm;
        {
            ag::NoGradGuard ng;
            fp = loss().item();
        }
        leaf.mutable_value()[i] = orig - h;
        {
            ag::NoGradGuard ng;
            fm = loss().item();
        }
        leaf.mutable_value()[i] = orig;
        numeric[i] = (fp - fm) / (2 * h);
    }
    leaf.zero_grad();
    return relative_error(analytic, numeric);
}

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("rucgan-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace rucgan::testing
