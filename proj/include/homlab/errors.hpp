#pragma once

#include <stdexcept>

namespace homlab {

/// Input outside the mathematical domain of an operation (non-unit normal,
/// parallel hyperplanes, non-rational direction, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Invalid configuration values (field parameters, stencil radius, schema).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Instance exceeds a solver's enumeration cap.
struct CapacityError : std::length_error {
  using std::length_error::length_error;
};

/// A solver precondition failed (e.g. label interaction is not a metric).
struct PreconditionError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace homlab
