// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "rucgan/archive.hpp"
#include "rucgan/nn.hpp"

namespace rucgan {

struct AdamOptions {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction. Parameters without an accumulated gradient are
/// left untouched.
class Adam {
public:
    Adam(ParamList params, AdamOptions options);

    void step();
    void zero_grad();

    long steps_taken() const { return t_; }
    const AdamOptions& options() const { return options_; }

    /// Moments as "<prefix>m/<name>", "<prefix>v/<name>" plus the step count.
    void export_state(TensorArchive& archive, const std::string& prefix) const;
    void import_state(const TensorArchive& archive, const std::string& prefix);

private:
    ParamList params_;
    AdamOptions options_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    long t_ = 0;
};

}  // namespace rucgan
