#pragma once

#include <stdexcept>
#include <string>

namespace gridnorm {

/// Invalid user-facing input: bad arguments, malformed files, inconsistent
/// configuration, violated model-validity conditions. Maps to CLI exit 3.
class input_error : public std::invalid_argument {
public:
    explicit input_error(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical procedure failed (root bracketing, eigendecomposition,
/// degenerate sample). Maps to CLI exit 4.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gridnorm
