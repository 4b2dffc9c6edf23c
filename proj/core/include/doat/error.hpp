#pragma once

#include <stdexcept>
#include <string>

namespace doat {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text. `line()` is 1-based, or 0 when not line-oriented.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A protocol or simulator invariant was violated during a run.
class InvariantError : public Error {
public:
    using Error::Error;
};

/// Traffic was still in flight when a run's time budget ran out.
class NonQuiescentError : public Error {
public:
    using Error::Error;
};

}  // namespace doat
