// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary tensor archive used for checkpoints and backbone weights.
//
//   magic line (e.g. "RUCGAN-CKPT-1\n")
//   u64 header length, JSON header bytes
//   u64 tensor count, then per tensor:
//       u32 name length, name bytes, u32 rank, i32 dims[rank], f64 values[numel]
//   u64 FNV-1a hash of every preceding byte
//
// Integers and doubles are written in host byte order (little-endian on all
// supported targets).

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rucgan/tensor.hpp"

namespace rucgan {

struct TensorArchive {
    std::string magic;
    nlohmann::json header = nlohmann::json::object();
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const;
    const Tensor& get(const std::string& name) const;
};

void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
/// Throws FormatError on a magic mismatch, truncation or checksum failure.
TensorArchive read_archive(const std::filesystem::path& path, const std::string& expected_magic);

}  // namespace rucgan
