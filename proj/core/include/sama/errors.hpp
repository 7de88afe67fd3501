#pragma once

#include <stdexcept>
#include <string>

namespace sama {

// Tensor / clip dimension mismatches. Messages name both shapes involved.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Operation precondition violations (T < 1, empty scene, N > T, ...).
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Bad run configuration: unknown keys, missing manifest kinds, unrealizable
// pooling grids. Maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Instruction text contains a token outside the closed grammar.
struct VocabError : ConfigError {
    using ConfigError::ConfigError;
};

// Filesystem failures. Maps to CLI exit code 3.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed serialized content (manifest lines, containers); carries position info.
struct ParseError : IoError {
    using IoError::IoError;
};

// Non-finite losses or diverging integration. Maps to CLI exit code 4.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace sama
