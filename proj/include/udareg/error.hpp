#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace udareg {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dimension or length mismatch between arguments.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Non-finite gradient, loss or metric during optimization.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// Malformed, inconsistent or insufficient data.
class DataError : public Error {
public:
    using Error::Error;
    DataError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    // 1-based line of the offending row, 0 when not tied to a file line.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_ = 0;
};

// Invalid or unknown configuration value.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Operation requested on a model of the wrong mode (Single vs Pairwise).
class ModeError : public Error {
public:
    using Error::Error;
};

// A loss term is enabled but its inputs were not supplied.
class MissingInputError : public Error {
public:
    using Error::Error;
};

// Anchor coordinates coincide, so the affine age map is undefined.
class DegenerateAnchorError : public Error {
public:
    using Error::Error;
};

}  // namespace udareg
