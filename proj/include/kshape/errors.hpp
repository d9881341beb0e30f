#pragma once

#include <stdexcept>
#include <string>

namespace kshape {

/// Shapes or sizes that do not agree with each other.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A configuration whose centered coordinates vanish (all landmarks equal).
struct ZeroNormError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Log map or parallel transport requested between antipodal pre-shapes.
struct UndefinedMapError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Argument outside the domain of an operation (non-tangent vector, bad label, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Malformed input files.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace kshape
