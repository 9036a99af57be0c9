#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hmatch {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated by the caller (shape mismatch, out-of-range value, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A dense O(n^3) routine was asked to work on a matrix larger than it allows.
class SizeLimitError : public Error {
 public:
  using Error::Error;
};

/// A column has zero norm after row-centering and cannot be normalised.
class DegenerateColumnError : public Error {
 public:
  explicit DegenerateColumnError(std::size_t column)
      : Error("column " + std::to_string(column) +
              " has zero norm after row-centering"),
        column_(column) {}

  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

/// Every scalar handed to the 2-means solver is (numerically) the same value.
class DegenerateClusteringError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace hmatch
