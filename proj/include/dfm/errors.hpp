#pragma once

#include <stdexcept>
#include <string>

namespace dfm {

/// Dimension or layout mismatch between inputs.
class StructuralError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Rejected input data or configuration (bad CSV, degenerate variable, bad range).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Floating-point breakdown inside the filter, smoother or an M-step.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dfm
