#pragma once

#include <stdexcept>
#include <string>

namespace drrho {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid dimensions, fractions, hyperparameters or mismatched artifacts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A function argument is outside its documented domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// An embedding direction cannot be normalized (norm below 1e-12).
class DegenerateEmbeddingError : public Error {
 public:
  using Error::Error;
};

/// A numerical solver failed to meet its tolerance.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// An operation was called out of order on trainer state.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared during training.
class TrainingAborted : public Error {
 public:
  using Error::Error;
};

// Load errors. Each failure mode has its own type so callers can tell a
// damaged file from an incompatible one.
class LoadError : public Error {
 public:
  using Error::Error;
};
class FormatError : public LoadError {
 public:
  using LoadError::LoadError;
};
class VersionError : public LoadError {
 public:
  using LoadError::LoadError;
};
class ChecksumError : public LoadError {
 public:
  using LoadError::LoadError;
};
class TruncatedError : public LoadError {
 public:
  using LoadError::LoadError;
};

}  // namespace drrho
