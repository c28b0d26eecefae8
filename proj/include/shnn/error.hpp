#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shnn {

/// Invalid dimensions, names, ranges or other caller-supplied configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A non-finite value appeared during evaluation or training.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The operation is not defined for this model kind.
struct UnsupportedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input file; `line` is 1-based.
struct ParseError : std::runtime_error {
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line(line) {}
    std::size_t line;
};

} // namespace shnn
