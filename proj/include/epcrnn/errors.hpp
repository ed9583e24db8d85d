#pragma once

#include <stdexcept>
#include <string>

namespace ep {

// Shape/dimension violations in tensor kernels. Messages name the offending axis.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad or inconsistent run configuration (missing teacher logits, unknown keys, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or truncated input files (IDX, CIFAR, checkpoints, teacher logits).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values appeared during phase iteration; carries the step index.
struct DivergenceError : std::runtime_error {
    int step = -1;
    DivergenceError(const std::string& msg, int step_) : std::runtime_error(msg), step(step_) {}
};

}  // namespace ep
