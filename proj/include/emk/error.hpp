#pragma once

#include <stdexcept>
#include <string>

namespace emk {

// Malformed or truncated input files, bad magic numbers, shape mismatches
// discovered while decoding.
struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Arithmetic failures: normalizing a zero descriptor, non-finite values
// where finite ones are required.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace emk
