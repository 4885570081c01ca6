#pragma once

#include <stdexcept>
#include <string>

namespace camo {

/// Base of every error raised by the library. `exit_code()` is the process
/// status the CLI reports for it.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 4; }
};

/// Numeric argument outside its admissible domain (negative sigma, even kernel).
class ParameterError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// Shapes or value sets that do not agree (size mismatch, non-binary mask).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Degenerate geometry: fewer than three points, collinear input.
class GeometryError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// Violated precondition or quality gate (untrained detector, tiny manifest).
class PreconditionError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// A model produced a non-finite value, or a checkpoint does not match.
class ModelStateError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Operation requires gradient access the handle does not provide.
class CapabilityError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

}  // namespace camo
