#pragma once

#include <stdexcept>
#include <string>

namespace otdebias {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents are invalid or two operands disagree on shape.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A configuration or numeric parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented precondition (empty, non-finite, unnormalized).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A catalog is missing a mandatory column.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Rejection sampling accepted too few draws to be meaningful.
class DegenerateSelectionError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace otdebias
