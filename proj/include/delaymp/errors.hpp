#pragma once

#include <stdexcept>
#include <string>

namespace delaymp {

enum class ErrorCode {
  GridMismatch,
  BadInterval,
  NonFiniteSegment,
  NonFiniteState,
  BadWindow,
  NonFiniteObjective,
  NonFinite,
  NoConvergence,
  BadWeight,
  AdjointMissing,
  BoundaryControl,
  DomainError,
  DivergentIntegral,
  NoSignChange,
  ConfigError,
  IoError,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace delaymp
