#pragma once

#include <stdexcept>
#include <string>

namespace sensordrop {

// Base of every error the library throws. Callers that only care about
// "something went wrong" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or layer shapes disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// API called out of order (e.g. backward before forward).
class UsageError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf showed up in a loss or gradient during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Malformed or incompatible dataset/checkpoint file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Bad experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Fusion requested with an all-zero action mask.
class DegenerateAction : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace sensordrop
