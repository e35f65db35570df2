#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffnea {

/// An arithmetic operation was applied outside its domain (sqrt of a
/// negative number, division by zero).
class DomainError : public std::domain_error {
 public:
  DomainError(std::string operation, const std::string& detail)
      : std::domain_error(operation + ": " + detail),
        operation_(std::move(operation)) {}

  const std::string& operation() const noexcept { return operation_; }

 private:
  std::string operation_;
};

/// The differentiation graph does not connect a loss to its parameters.
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A tree or configuration document violates its schema.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string link, const std::string& detail)
      : std::runtime_error(link.empty() ? detail : "link '" + link + "': " + detail),
        link_(std::move(link)) {}

  const std::string& link() const noexcept { return link_; }

 private:
  std::string link_;
};

/// The articulated inertia seen by a joint is (numerically) singular.
class SingularInertiaError : public std::runtime_error {
 public:
  SingularInertiaError(std::string link, double denominator)
      : std::runtime_error("singular articulated inertia at link '" + link +
                           "' (s^T M s = " + std::to_string(denominator) + ")"),
        link_(std::move(link)) {}

  const std::string& link() const noexcept { return link_; }

 private:
  std::string link_;
};

/// A dataset or result file could not be parsed.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& detail)
      : std::runtime_error("line " + std::to_string(line) + ": " + detail), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Training produced a non-finite loss.
class NumericAbort : public std::runtime_error {
 public:
  NumericAbort(std::size_t batch, std::vector<double> snapshot, const std::string& detail)
      : std::runtime_error("non-finite loss at batch " + std::to_string(batch) + ": " + detail),
        batch_(batch),
        snapshot_(std::move(snapshot)) {}

  std::size_t batch() const noexcept { return batch_; }
  const std::vector<double>& snapshot() const noexcept { return snapshot_; }

 private:
  std::size_t batch_;
  std::vector<double> snapshot_;
};

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was requested for an actuator variant that does not support it.
class UnsupportedVariant : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace diffnea
