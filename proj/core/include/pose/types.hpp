#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pose {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (dimension mismatch, empty set, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A trajectory is missing data required by an operation.
class MalformedTrajectory : public Error {
 public:
  using Error::Error;
};

/// An update produced NaN or infinite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Text input (maze, config, checkpoint, memory snapshot) failed to parse.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what + " (line " + std::to_string(line) + ", column " +
              std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  [[nodiscard]] std::size_t line() const noexcept { return line_; }
  [[nodiscard]] std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace pose
