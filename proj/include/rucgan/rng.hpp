// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "rucgan/tensor.hpp"

namespace rucgan {

/// Every stochastic operation takes an explicit engine; callers own seeding.
using Rng = std::mt19937_64;

inline constexpr std::uint64_t kDefaultSeed = 1234;

/// Standard-normal tensor. Distribution objects are created per call so the
/// engine state alone determines the stream (important for checkpoint resume).
Tensor normal_tensor(const Shape& shape, Rng& rng, double stddev = 1.0);
Tensor uniform_tensor(const Shape& shape, Rng& rng, double lo, double hi);

std::string rng_state(const Rng& rng);
void set_rng_state(Rng& rng, const std::string& state);

}  // namespace rucgan
