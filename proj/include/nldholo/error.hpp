#pragma once

#include <stdexcept>
#include <string>

namespace nldholo {

/// Shapes or grids of two operands disagree.
class dimension_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A domain object violates its invariants (bad pitch, particle off-grid, ...).
class domain_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// NaN or Inf appeared where the result must be finite.
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace nldholo
