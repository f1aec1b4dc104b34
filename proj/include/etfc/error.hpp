#pragma once

#include <stdexcept>
#include <string>

namespace etfc {

/// Failure categories shared by the C++ core and the C API status codes.
enum class ErrorCode {
  Dimension = 1,
  Domain,
  Numeric,
  Unsupported,
  Degenerate,
  Config,
  Io,
  AtOptimum,
  CheckFailed,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(ErrorCode::Dimension, what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorCode::Domain, what) {}
};

/// Non-finite values. `step` is the optimizer step, trial or epoch index when
/// one is known, otherwise -1.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, long step = -1)
      : Error(ErrorCode::Numeric, what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

class UnsupportedError : public Error {
 public:
  explicit UnsupportedError(const std::string& what) : Error(ErrorCode::Unsupported, what) {}
};

class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& what) : Error(ErrorCode::Degenerate, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::Config, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::Io, what) {}
};

/// Raised when a contraction ratio is requested for an iterate already at the
/// optimum (the denominator is below the division guard).
class AtOptimumSignal : public Error {
 public:
  explicit AtOptimumSignal(const std::string& what) : Error(ErrorCode::AtOptimum, what) {}
};

}  // namespace etfc
