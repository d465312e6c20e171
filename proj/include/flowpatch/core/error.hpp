#pragma once

#include <stdexcept>
#include <string>

namespace flowpatch {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents (bad magic, unsupported header).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written, or its payload was truncated.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Raster shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameter combination (defense, estimator, attack or experiment).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Patch footprint does not fit inside the frame.
class PlacementError : public Error {
 public:
  using Error::Error;
};

/// Operation called out of order, e.g. a reverse pass before a forward pass.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Operation is mathematically undefined for its input (e.g. all-ones mask).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Patch optimization produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int step) : Error(what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace flowpatch
