#pragma once

#include <stdexcept>
#include <string>

namespace ftlab {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor dimension mismatch (caller passed incompatible shapes).
struct ShapeError : Error {
    using Error::Error;
};

// A documented precondition of an operation was violated.
struct ContractError : Error {
    using Error::Error;
};

// Invalid experiment/run configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed input data (bad labels, empty corpora, ...).
struct DataError : Error {
    using Error::Error;
};

// Corrupt or unreadable binary file.
struct FormatError : Error {
    FormatError(const std::string& msg, size_t byte_offset)
        : Error(msg + " at byte " + std::to_string(byte_offset)), offset(byte_offset) {}
    size_t offset;
};

// A checkpoint is missing an expected entry or does not match the model.
struct CheckpointError : ConfigError {
    using ConfigError::ConfigError;
};

}  // namespace ftlab
