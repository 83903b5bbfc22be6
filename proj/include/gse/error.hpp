#pragma once

#include <stdexcept>
#include <string>

namespace gse {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad sizes, mismatched settings, unsupported options.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input that is well-formed but carries no usable signal (zero energy, too short).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// Caller data that violates an operation's precondition (shape, index range).
class InputError : public Error {
public:
    using Error::Error;
};

/// Numerical breakdown (singular system, non-finite values).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Filesystem or format problems while reading/writing artifacts.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace gse
