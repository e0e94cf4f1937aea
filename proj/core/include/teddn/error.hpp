#pragma once

#include <stdexcept>
#include <string>

namespace teddn {

// Shape or axis mismatch between tensors.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A call violated an operation's contract (non-scalar loss, empty input, ...).
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration value or unknown configuration key.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unreadable or internally inconsistent data file.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Index outside the valid range.
struct BoundsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite value where a finite one is required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace teddn
