#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ridecomfort {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two inputs that must share a shape (length, step) do not.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input is well-formed but degenerate for the requested quantity (e.g. zero range).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// A query falls outside the domain of the model (e.g. outside the road grid hull).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Input violates an assumption the algorithm cannot handle (e.g. a reversing vehicle).
class UnsupportedInputError : public Error {
public:
    using Error::Error;
};

/// Not enough data for the requested operation.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value or parameter set.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Integration diverged or produced non-finite values.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Filter cannot be realized at the requested sample rate.
class DesignError : public Error {
public:
    using Error::Error;
};

/// Optimizer could not make progress (persistent evaluation failure).
class OptimizationError : public Error {
public:
    using Error::Error;
};

/// Text input could not be parsed. Carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// File system failure; the message names the path.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace ridecomfort
