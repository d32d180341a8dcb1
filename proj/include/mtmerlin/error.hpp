#pragma once

#include <stdexcept>
#include <string>

namespace mtmerlin {

enum class ErrorCode {
  ShapeMismatch,
  NotPSD,
  DegenerateSpectrum,
  NonFinite,
  Diverged,
  StaleTape,
  DegeneratePeak,
  NonPositiveInput,
  OutOfBounds,
  InvalidArgument,
  Io,
  Format,
  Config,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::StaleTape: return "StaleTape";
    case ErrorCode::DegeneratePeak: return "DegeneratePeak";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace mtmerlin
