#pragma once

#include <stdexcept>
#include <string>

namespace flowpath {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input or configuration rejected before any computation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class BudgetError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InsufficientDataError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Overflow, NaN or another floating-point failure during computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DegenerateWeightsError : public NumericError {
 public:
  using NumericError::NumericError;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace flowpath
