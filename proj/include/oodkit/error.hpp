#pragma once

#include <stdexcept>
#include <string>

namespace oodkit {

/// Violated precondition or API contract (bad label, empty dataset, ...).
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Incompatible tensor/layer shapes.
struct DimensionError : ContractError {
    using ContractError::ContractError;
};

/// Malformed file content (bad magic, truncation, ...).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite values or failed numerical decomposition.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace oodkit
