#pragma once

#include <random>
#include <stdexcept>
#include <string>

namespace drip {

// Forward/normalization behavior switch shared by all stateful layers.
enum class Mode { Train, Infer };

using Rng = std::mt19937;

// Dimension or layout disagreement between tensors/parameters.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid value for an operation parameter (rate, range, position, ...).
struct ParamError : std::invalid_argument {
    explicit ParamError(const std::string& what) : std::invalid_argument(what) {}
};

// NetConfig or pipeline config violates a structural invariant.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Serialized data does not match the expected format (magic, CRC, shapes).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem/stream failure.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace drip
