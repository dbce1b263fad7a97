#pragma once

#include <stdexcept>
#include <string>

namespace lcsync {

// Error categories map one-to-one onto CLI exit codes (see tools/lcsync.cpp).

/// Invalid input: non-finite values, bad configuration, off-cycle anchors.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A query or sweep fell outside the region covered by a computed field.
class CoverageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Integration, root-finding or fixed-point iteration failed to converge, or a
/// runtime check of an optimality condition was violated.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace lcsync
