#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pcarect {

// Base class for every error raised by the library. Anything that is not a
// ConfigError is a data error (bad input files, capacity limits, ...).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or argument values supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed text or binary input; carries the 1-based line (or record) number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what);

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace pcarect
