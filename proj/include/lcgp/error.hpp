#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lcgp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model parameters or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (non-finite values, bad ordering).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Factorization failed after exhausting the jitter schedule.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::vector<double> attempted_jitter)
      : Error(what), attempted_jitter_(std::move(attempted_jitter)) {}

  const std::vector<double>& attempted_jitter() const { return attempted_jitter_; }

 private:
  std::vector<double> attempted_jitter_;
};

/// Text that could not be parsed; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Statistic undefined for the given data (e.g. zero variance).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace lcgp
