// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "rucgan/rng.hpp"

#include <sstream>

#include "rucgan/error.hpp"

namespace rucgan {

Tensor normal_tensor(const Shape& shape, Rng& rng, double stddev) {
    Tensor t(shape);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : t.data()) {
        v = dist(rng);
    }
    return t;
}

Tensor uniform_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
    Tensor t(shape);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data()) {
        v = dist(rng);
    }
    return t;
}

std::string rng_state(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

void set_rng_state(Rng& rng, const std::string& state) {
    std::istringstream is(state);
    is >> rng;
    if (!is) {
        throw FormatError("corrupt random engine state");
    }
}

}  // namespace rucgan
