#pragma once

#include <stdexcept>
#include <string>

namespace bisim {

/// Base of every error raised by the library. The CLI maps subclasses to
/// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A point coincides with an antenna, or a geometric construction degenerates.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation's contract (shape mismatch, wrong mode).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A solver failed to converge or hit a numerically degenerate case (exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File system or archive format problem (exit code 4).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace bisim
