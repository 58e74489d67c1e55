#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kmesn {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A configuration or structural parameter is out of its valid range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Power iteration hit an all-zero (or nilpotent) matrix or did not converge.
class DegenerateSpectrum : public Error {
 public:
  using Error::Error;
};

/// Cholesky factorization failed even after the diagonal jitter retry.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

/// Input is empty or otherwise degenerate for the requested operation.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// A class label is outside [0, n_classes).
class LabelError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset or model file. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A dataset file parsed correctly but holds no frames.
class EmptyDataset : public Error {
 public:
  using Error::Error;
};

}  // namespace kmesn
