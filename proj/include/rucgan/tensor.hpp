// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace rucgan {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor of doubles. Four-dimensional tensors use N×C×H×W.
///
/// A tensor may be "unmaterialized": it carries a shape but no storage. This
/// is used to describe very large models (parameter counting) without
/// allocating them.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor shape_only(Shape shape);
    static Tensor scalar(double v) { return Tensor(Shape{1}, v); }

    const Shape& shape() const noexcept { return shape_; }
    int rank() const noexcept { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    std::size_t numel() const noexcept { return shape_numel(shape_); }
    bool materialized() const noexcept { return data_.size() == numel() && !shape_.empty(); }
    bool empty() const noexcept { return shape_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    double* ptr() noexcept { return data_.data(); }
    const double* ptr() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // NCHW accessors; no bounds checks beyond debug asserts.
    double& at(int n, int c, int y, int x) {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    double at(int n, int c, int y, int x) const {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    // CHW accessors for single images.
    double& at(int c, int y, int x) {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    double at(int c, int y, int x) const {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }

    void fill(double v);
    Tensor reshaped(Shape shape) const;
    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

    double sum() const;
    double max_abs() const;
    bool all_finite() const;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Largest absolute elementwise difference; throws DimensionError on shape mismatch.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Throws DimensionError with `what` if the shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace rucgan
