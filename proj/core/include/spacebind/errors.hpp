#pragma once

#include <stdexcept>
#include <string>

namespace spacebind {

// Shape mismatches between operands (matmul, concat, batch sizes, ...).
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration values; message names the offending field.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Degenerate or inconsistent data (zero rows where a direction is needed,
// missing labels, manifest/file disagreements, ...).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failures; message carries the path.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace spacebind
