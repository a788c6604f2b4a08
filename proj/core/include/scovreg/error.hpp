#pragma once

#include <stdexcept>
#include <string>

namespace scovreg {

/// Bad caller input: wrong shapes, invalid parameters, malformed data.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation produced non-finite values or failed to converge to a usable point.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace scovreg
