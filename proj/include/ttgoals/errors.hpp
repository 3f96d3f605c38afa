#pragma once

#include <stdexcept>
#include <string>

namespace ttgoals {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public Error {
 public:
  using Error::Error;
};

/// Raised by the throw solver; carries the drag-free reach for diagnostics.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double max_range)
      : Error(what), max_range_(max_range) {}
  double max_range() const { return max_range_; }

 private:
  double max_range_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class EnvError : public Error {
 public:
  using Error::Error;
};

class NotRelabelable : public Error {
 public:
  using Error::Error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace ttgoals
