#pragma once

#include <stdexcept>
#include <string>

namespace iprnet {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration value; the message names the offending field.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Tensor or mask dimensions do not satisfy an operation's contract.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Episode sampling could not be satisfied; the message names the class.
class SamplingError : public Error {
public:
    using Error::Error;
};

/// Masked pooling selected zero pixels for the requested class.
class EmptyRegionError : public Error {
public:
    using Error::Error;
};

/// Cosine similarity requested on a vector with near-zero norm.
class DegenerateVectorError : public Error {
public:
    using Error::Error;
};

/// Argument outside an operation's domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Non-finite value where a finite one is required; names the term.
class NumericError : public Error {
public:
    using Error::Error;
};

/// File or serialization failure.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace iprnet
