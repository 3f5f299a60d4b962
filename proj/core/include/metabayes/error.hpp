#pragma once

#include <stdexcept>
#include <string>

namespace metabayes {

// Base for every error the library raises. Callers that only need a message
// catch this; the CLI maps the concrete kinds onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (CSV, JSON). Carries the 1-based row when known.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what, long row = -1)
      : Error(what), row_(row) {}
  long row() const noexcept { return row_; }

 private:
  long row_;
};

// Inconsistent or incomplete configuration (missing role, bad dimensions).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Data that parses but violates a domain invariant (responders > sampleSize).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Sampling could not proceed (e.g. every warmup transition diverged).
class SamplingError : public Error {
 public:
  using Error::Error;
};

}  // namespace metabayes
