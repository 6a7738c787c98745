#pragma once

#include <stdexcept>
#include <string>

namespace afcsim {

/// Base class for every error raised by the simulator.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or semantically invalid configuration, script or scheme text.
/// Carries the 1-based line/column of the offending token when known.
class ConfigError : public Error {
public:
    ConfigError(const std::string& message, int line = 0, int column = 0,
                std::string source = {});

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }
    const std::string& source() const noexcept { return source_; }

private:
    int line_;
    int column_;
    std::string source_;
};

/// A precondition on a numeric argument was violated.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed (degenerate fit, non-decaying spectrum, ...).
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace afcsim
