#pragma once

#include <stdexcept>
#include <string>

namespace istar {

// Exception hierarchy. Each leaf maps onto one CLI exit code.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

/// Malformed input: bad shapes, unreadable files, parse failures (exit 2).
class InputError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// Checkpoint and configuration disagree (exit 3).
class ConfigMismatch : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// A NaN or Inf was produced somewhere (exit 4).
class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

class ShapeError : public InputError {
public:
    using InputError::InputError;
};

} // namespace istar
