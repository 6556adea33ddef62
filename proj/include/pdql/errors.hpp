#pragma once

#include <stdexcept>
#include <string>

namespace pdql {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Array dimensions of a model are inconsistent.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the mathematical domain of a formula.
class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what, int line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class NonConvergence : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

}  // namespace pdql
