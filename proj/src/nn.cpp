// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "rucgan/nn.hpp"

#include <cmath>

namespace rucgan {

std::size_t count_parameters(const ParamList& params) {
    std::size_t total = 0;
    for (const auto& [name, p] : params) {
        total += p.value().numel();
    }
    return total;
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, bool with_bias, Rng* rng)
    : geometry{stride, pad} {
    const Shape wshape{out_channels, in_channels, kernel, kernel};
    if (rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels) * kernel * kernel);
        weight = ag::Var(uniform_tensor(wshape, *rng, -bound, bound), true);
        if (with_bias) {
            bias = ag::Var(uniform_tensor({out_channels}, *rng, -bound, bound), true);
        }
    } else {
        weight = ag::Var(Tensor::shape_only(wshape), true);
        if (with_bias) {
            bias = ag::Var(Tensor::shape_only({out_channels}), true);
        }
    }
}

ag::Var Conv2d::forward(const ag::Var& x) const { return ag::conv2d(x, weight, bias, geometry); }

ag::Var Conv2d::forward_with(const ag::Var& x, const ag::Var& w) const { return ag::conv2d(x, w, bias, geometry); }

void Conv2d::collect(ParamList& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".weight", weight);
    if (bias) {
        out.emplace_back(prefix + ".bias", *bias);
    }
}

namespace {

void normalize(Tensor& t) {
    double n = 0.0;
    for (double v : t.data()) {
        n += v * v;
    }
    n = std::sqrt(n) + 1e-12;
    for (double& v : t.data()) {
        v /= n;
    }
}

}  // namespace

SpectralConv2d::SpectralConv2d(int in_channels, int out_channels, int kernel, int stride, int pad, Rng* rng,
                               int warmup_iterations)
    : conv(in_channels, out_channels, kernel, stride, pad, true, rng) {
    const int cols = in_channels * kernel * kernel;
    if (rng) {
        u = normal_tensor({out_channels}, *rng);
        normalize(u);
        v = Tensor({cols}, 0.0);
        power_iteration(warmup_iterations);
    } else {
        u = Tensor::shape_only({out_channels});
        v = Tensor::shape_only({cols});
    }
}

void SpectralConv2d::power_iteration(int steps) {
    const Tensor& w = conv.weight.value();
    const int rows = w.dim(0);
    const std::size_t cols = w.numel() / static_cast<std::size_t>(rows);
    for (int it = 0; it < steps; ++it) {
        v.fill(0.0);
        for (int i = 0; i < rows; ++i) {
            const double ui = u[static_cast<std::size_t>(i)];
            const double* wr = w.ptr() + static_cast<std::size_t>(i) * cols;
            for (std::size_t j = 0; j < cols; ++j) {
                v[j] += wr[j] * ui;
            }
        }
        normalize(v);
        for (int i = 0; i < rows; ++i) {
            const double* wr = w.ptr() + static_cast<std::size_t>(i) * cols;
            double acc = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
                acc += wr[j] * v[j];
            }
            u[static_cast<std::size_t>(i)] = acc;
        }
        normalize(u);
    }
}

ag::Var SpectralConv2d::forward(const ag::Var& x, bool update) {
    if (update) {
        power_iteration(1);
    }
    return conv.forward_with(x, ag::spectral_divide(conv.weight, u, v));
}

Tensor SpectralConv2d::normalized_weight() const {
    ag::NoGradGuard guard;
    return ag::spectral_divide(conv.weight, u, v).value();
}

void SpectralConv2d::collect(ParamList& out, const std::string& prefix) const { conv.collect(out, prefix); }

void SpectralConv2d::collect_buffers(BufferList& out, const std::string& prefix) {
    out.emplace_back(prefix + ".sn_u", &u);
    out.emplace_back(prefix + ".sn_v", &v);
}

}  // namespace rucgan
