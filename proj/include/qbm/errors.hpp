// errors.hpp - exception types shared by every qbm module

#pragma once

#include <stdexcept>
#include <string>

namespace qbm {

// Invalid arguments or configuration (bad parameters, dimension mismatch,
// malformed input files).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A continuum integral that does not converge for the requested model.
class DivergentIntegral : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Numerical breakdown: failed eigendecomposition, singular maps, etc.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

} // namespace detail

inline constexpr double pi = 3.14159265358979323846;

} // namespace qbm
