#pragma once

#include <stdexcept>
#include <string>

namespace meshvae {

/// Bad input: malformed files, shape mismatches, invalid configuration.
/// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure: non-finite losses, solver breakdown.
/// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace meshvae
