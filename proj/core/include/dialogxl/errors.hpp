#pragma once

#include <stdexcept>
#include <string>

namespace dialogxl {

// Shape/size violations in tensor algebra. Messages name both shapes.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input files, schema violations, label/vocab mismatches.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid model/trainer configuration (head allocation, divisibility, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Nonfinite values, degenerate softmax rows, diverged training.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Out-of-order utterance processing against a memory bank.
struct SequencingError : std::runtime_error {
    explicit SequencingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dialogxl
