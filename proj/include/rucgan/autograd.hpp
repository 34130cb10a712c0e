// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode automatic differentiation over Tensor.
//
// A Var wraps a shared graph node. Operations record a backward closure only
// when gradient recording is enabled and at least one input requires a
// gradient; otherwise they produce a plain constant Var.

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "rucgan/kernels.hpp"
#include "rucgan/tensor.hpp"

namespace rucgan::ag {

struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward_fn;

    /// Gradient buffer, zero-initialized on first use.
    Tensor& grad_buffer();
};

class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool defined() const { return static_cast<bool>(node_); }

    /// Accumulated gradient; empty tensor when nothing flowed here.
    const Tensor& grad() const { return node_->grad; }
    void zero_grad() { node_->grad = Tensor(); }

    /// Scalar value of a one-element Var.
    double item() const { return node_->value[0]; }

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    friend Var make_op(Tensor, std::vector<Var>, std::function<void(Node&)>);
    std::shared_ptr<Node> node_;
};

/// Builds an op result. `backward` receives the result node; its inputs are in
/// node.inputs in the order given here.
Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

/// True unless a NoGradGuard is alive on this thread.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Back-propagates from a scalar root, accumulating into leaf gradients.
void backward(const Var& root);

/// Returns a constant Var sharing no graph with `v`.
Var detach(const Var& v);

// ---- elementwise ---------------------------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var tanh(const Var& a);

// ---- reductions ------------------------------------------------------------

/// Mean over all elements; result has shape {1}.
Var mean(const Var& a);
/// Mean of |a - b| over all elements; result has shape {1}.
Var mean_abs_diff(const Var& a, const Var& b);

// ---- spatial ---------------------------------------------------------------

Var conv2d(const Var& x, const Var& w, const std::optional<Var>& bias, kernels::ConvGeometry g);
Var upsample_nearest2x(const Var& x);
/// 2×2 average pooling with stride 2 (odd trailing rows/cols are dropped).
Var avg_pool2x(const Var& x);
Var concat_channels(const std::vector<Var>& parts);
/// Concatenates along the batch dimension.
Var concat_batch(const std::vector<Var>& parts);
/// Slices batch entries [begin, end).
Var slice_batch(const Var& x, int begin, int end);

// ---- normalization ---------------------------------------------------------

/// Per-channel standardization pooled over N, H and W:
///   mu_c = mean h, sigma_c = sqrt(mean(h^2) - mu_c^2) clamped below at eps,
///   out = (h - mu_c) / sigma_c.
Var batch_standardize(const Var& h, double eps);
/// Per-sample, per-channel standardization over H and W: (x - mean) / sqrt(var + eps).
Var instance_norm(const Var& x, double eps);

/// h + scale[c] * noise[n, 0, y, x]; noise is a constant N×1×H×W tensor.
Var add_channel_noise(const Var& h, const Var& scale, const Tensor& noise);

/// w / sigma with sigma = u^T W v for the given (constant) singular vectors,
/// W being w reshaped to (out, rest).
Var spectral_divide(const Var& w, const Tensor& u, const Tensor& v);

}  // namespace rucgan::ag
