#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace segrefine {

// Invalid arguments and out-of-range indices use std::invalid_argument and
// std::out_of_range directly. The types below cover the remaining failure
// classes so callers (mostly the CLI) can map them to exit codes.

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or truncated stream.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedFormat : public FormatError {
public:
    using FormatError::FormatError;
};

/// Checksum mismatch inside one sidecar segment block.
class CorruptionError : public std::runtime_error {
public:
    CorruptionError(std::size_t segment, const std::string& what)
        : std::runtime_error(what), segment_(segment) {}
    std::size_t segment() const noexcept { return segment_; }

private:
    std::size_t segment_;
};

/// Non-finite values during training or gradient checking.
class NumericFailure : public std::runtime_error {
public:
    NumericFailure(std::size_t step, const std::string& what)
        : std::runtime_error(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class TilingViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace segrefine
