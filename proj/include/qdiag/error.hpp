#pragma once

#include <stdexcept>
#include <string>

namespace qdiag {

/// Base class for all qdiag errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Shape disagreement between inputs; the message names the mismatched axis.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Operation not defined for the given unit kind or problem size.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// Malformed input file; the message carries the position (path, line/row).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Non-finite values appeared where finite ones are required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure (missing path, unwritable output).
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace qdiag
