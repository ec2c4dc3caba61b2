#pragma once

#include <stdexcept>
#include <string>

namespace lrc {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or unreadable input file.
struct ParseError : Error {
    using Error::Error;
};

// Incompatible matrix or block dimensions.
struct DimensionError : Error {
    using Error::Error;
};

// A polytope description with no interior data (zero rows, empty box).
struct EmptySetError : Error {
    using Error::Error;
};

// A matrix expected to be block-lower-triangular is not, within tolerance.
struct NotBltError : Error {
    using Error::Error;
};

// A constraint-set feature outside the supported H-polytope/box family.
struct UnsupportedSetError : Error {
    using Error::Error;
};

// The synthesis problem was reported infeasible with a certificate.
struct InfeasibleError : Error {
    using Error::Error;
};

// The conic solver stopped without reaching the requested accuracy.
struct SolverError : Error {
    using Error::Error;
};

}  // namespace lrc
