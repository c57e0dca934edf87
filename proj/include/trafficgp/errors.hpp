#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trafficgp {

enum class ErrorCode {
  ParameterShape,
  EmptyInput,
  IllConditioned,
  InvalidStart,
  DegenerateData,
  InsufficientData,
  AbortedRun,
  Protocol,
  FrameTooLarge,
  Timeout,
  Format,
  Split,
  UndefinedMetric,
  Config,
  Io,
  ModelMismatch,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParameterShape: return "PARAMETER_SHAPE";
    case ErrorCode::EmptyInput: return "EMPTY_INPUT";
    case ErrorCode::IllConditioned: return "ILL_CONDITIONED_KERNEL";
    case ErrorCode::InvalidStart: return "INVALID_START";
    case ErrorCode::DegenerateData: return "DEGENERATE_DATA";
    case ErrorCode::InsufficientData: return "INSUFFICIENT_DATA";
    case ErrorCode::AbortedRun: return "ABORTED_RUN";
    case ErrorCode::Protocol: return "PROTOCOL_ERROR";
    case ErrorCode::FrameTooLarge: return "FRAME_TOO_LARGE";
    case ErrorCode::Timeout: return "TIMEOUT";
    case ErrorCode::Format: return "FORMAT_ERROR";
    case ErrorCode::Split: return "SPLIT_ERROR";
    case ErrorCode::UndefinedMetric: return "UNDEFINED_METRIC";
    case ErrorCode::Config: return "CONFIG_ERROR";
    case ErrorCode::Io: return "IO_ERROR";
    case ErrorCode::ModelMismatch: return "MODEL_MISMATCH";
  }
  return "UNKNOWN";
}

/// Base exception for every failure surfaced by the library. The code is
/// stable and is what the CLI writes into error reports.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace trafficgp
