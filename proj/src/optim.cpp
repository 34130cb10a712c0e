// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "rucgan/optim.hpp"

#include <cmath>

#include "rucgan/error.hpp"

namespace rucgan {

Adam::Adam(ParamList params, AdamOptions options) : params_(std::move(params)), options_(options) {
    if (!(options.lr > 0.0)) {
        throw ParameterError("learning rate must be positive");
    }
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& [name, p] : params_) {
        m_.emplace_back(p.shape(), 0.0);
        v_.emplace_back(p.shape(), 0.0);
    }
}

void Adam::zero_grad() {
    for (auto& [name, p] : params_) {
        p.zero_grad();
    }
}

void Adam::step() {
    ++t_;
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        ag::Var& p = params_[k].second;
        const Tensor& g = p.grad();
        if (g.empty()) {
            continue;
        }
        Tensor& w = p.mutable_value();
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        const std::size_t n = w.numel();
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            w[i] -= options_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.epsilon);
        }
    }
}

void Adam::export_state(TensorArchive& archive, const std::string& prefix) const {
    for (std::size_t k = 0; k < params_.size(); ++k) {
        archive.tensors.emplace_back(prefix + "m/" + params_[k].first, m_[k]);
        archive.tensors.emplace_back(prefix + "v/" + params_[k].first, v_[k]);
    }
    archive.header[prefix + "t"] = t_;
}

void Adam::import_state(const TensorArchive& archive, const std::string& prefix) {
    for (std::size_t k = 0; k < params_.size(); ++k) {
        const Tensor& m = archive.get(prefix + "m/" + params_[k].first);
        const Tensor& v = archive.get(prefix + "v/" + params_[k].first);
        if (!m.same_shape(m_[k]) || !v.same_shape(v_[k])) {
            throw FormatError("optimizer state shape mismatch for " + params_[k].first);
        }
        m_[k] = m;
        v_[k] = v;
    }
    t_ = archive.header.at(prefix + "t").get<long>();
}

}  // namespace rucgan
