#pragma once

#include <stdexcept>

namespace tsenas {

// Bad input: malformed files, out-of-range parameters, schema violations.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Numeric failure during a run (non-finite loss or gradient).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tsenas
