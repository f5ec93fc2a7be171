#pragma once

#include <stdexcept>
#include <string>

namespace pairforge {

// Config / input validation failure. Messages carry a JSON-pointer-ish path
// to the offending field where one exists. CLI maps this to exit code 3.
struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

// Out-of-validity-range query against a coefficient table. Message names the
// violated bound.
struct RangeError : std::runtime_error {
    explicit RangeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical solver failure (no root, lost mode track, non-convergence).
// CLI maps this to exit code 4.
struct SolveError : std::runtime_error {
    explicit SolveError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pairforge
