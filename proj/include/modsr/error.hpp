#pragma once

#include <stdexcept>
#include <string>

namespace modsr {

// Exception hierarchy. The CLI maps each family to an exit code:
// ConfigError -> 1, DataError -> 2, NumericalError -> 3.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid options, precondition violations on user-supplied parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or missing input data, I/O failures, shape mismatches.
class DataError : public Error {
public:
    using Error::Error;
};

/// Failures of a numerical procedure (singular systems, divergence, ...).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A value lies outside the domain in which an operation is defined,
/// e.g. a distorted radius beyond the fold-over point of the lens model.
class DomainError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace modsr
