// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace rucgan {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Spatial or tensor shapes disagree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A label index or palette length is outside [0, num_labels).
class LabelRangeError : public Error {
public:
    using Error::Error;
};

/// A numeric argument is outside its documented domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Missing or inconsistent configuration (backbone, checkpoint config, scorer).
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents (bad magic, truncated archive, undecodable PNG).
class FormatError : public Error {
public:
    using Error::Error;
};

/// A loss or gradient became NaN/Inf during training.
class NonFiniteError : public Error {
public:
    NonFiniteError(long step, std::string loss_name)
        : Error("non-finite value in '" + loss_name + "' at step " + std::to_string(step)),
          step_(step),
          loss_name_(std::move(loss_name)) {}

    long step() const noexcept { return step_; }
    const std::string& loss_name() const noexcept { return loss_name_; }

private:
    long step_;
    std::string loss_name_;
};

}  // namespace rucgan
