#pragma once

#include <stdexcept>
#include <string>

namespace aalen {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kOutOfDomain,
  kEmptyDataset,
  kCapExceeded,
  kSingularSystem,
  kNonPositiveIntensity,
  kBoundViolated,
  kParse,
  kIo,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kOutOfDomain: return "out_of_domain";
    case ErrorCode::kEmptyDataset: return "empty_dataset";
    case ErrorCode::kCapExceeded: return "cap_exceeded";
    case ErrorCode::kSingularSystem: return "singular_system";
    case ErrorCode::kNonPositiveIntensity: return "non_positive_intensity";
    case ErrorCode::kBoundViolated: return "bound_violated";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown";
}

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace aalen
