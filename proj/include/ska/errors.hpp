#pragma once

#include <stdexcept>
#include <string>

namespace ska {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// dense linear algebra
struct NonSquare : Error { using Error::Error; };
struct NonSymmetric : Error { using Error::Error; };
struct NotPositiveDefinite : Error { using Error::Error; };
struct SingularDiagonal : Error { using Error::Error; };

// statistics
struct DimensionMismatch : Error { using Error::Error; };
struct EmptyMask : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };
struct OddDimension : Error { using Error::Error; };

// task generation
struct RangeExhausted : Error { using Error::Error; };
struct TieUnresolvable : Error { using Error::Error; };

// recall engine
struct KeyCapacityExceeded : Error { using Error::Error; };

// theory checks
struct PerturbationTooLarge : Error { using Error::Error; };

// cli / io
struct InvalidParams : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace ska
