#include "delaymp/errors.hpp"

namespace delaymp {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::BadInterval: return "BadInterval";
    case ErrorCode::NonFiniteSegment: return "NonFiniteSegment";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::BadWindow: return "BadWindow";
    case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::BadWeight: return "BadWeight";
    case ErrorCode::AdjointMissing: return "AdjointMissing";
    case ErrorCode::BoundaryControl: return "BoundaryControl";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::DivergentIntegral: return "DivergentIntegral";
    case ErrorCode::NoSignChange: return "NoSignChange";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace delaymp
