#include "etfc/error.hpp"

namespace etfc {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Dimension: return "dimension error";
    case ErrorCode::Domain: return "domain error";
    case ErrorCode::Numeric: return "numeric error";
    case ErrorCode::Unsupported: return "unsupported";
    case ErrorCode::Degenerate: return "degenerate input";
    case ErrorCode::Config: return "config error";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::AtOptimum: return "at optimum";
    case ErrorCode::CheckFailed: return "check failed";
  }
  return "unknown error";
}

}  // namespace etfc
