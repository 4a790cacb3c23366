#pragma once

#include <stdexcept>
#include <string>

namespace avaca {

// Root of every error raised by the library. The CLI maps UsageError to
// exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes that do not fit together (matmul inner dims, feature widths).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An out-of-range hyperparameter or configuration value.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf appeared in an array.
class NumericError : public ContractError {
 public:
  using ContractError::ContractError;
};

class SequenceTooShortError : public ContractError {
 public:
  using ContractError::ContractError;
};

class UndefinedMetricError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Malformed on-disk data (bad magic, bad CSV, unknown parameter names).
class FormatError : public Error {
 public:
  using Error::Error;
};

class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Visual and audio feature files disagree on clip count.
class AlignmentError : public FormatError {
 public:
  using FormatError::FormatError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace avaca
