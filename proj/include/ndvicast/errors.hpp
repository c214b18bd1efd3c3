#pragma once

#include <stdexcept>
#include <string>

namespace ndvicast {

/// Input violates a documented schema, precondition or invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical stage could not produce a usable result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ndvicast
