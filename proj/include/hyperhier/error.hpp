#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hyperhier {

enum class ErrorCode {
  // hierarchy parsing and structure
  EmptyInput,
  IndentJump,
  BadIndent,
  MultipleRoots,
  DuplicateNodeId,
  NoRoot,
  NoSource,
  CycleDetected,
  UnknownChild,
  MultipleParents,
  UnknownNode,
  // geometry and embedding
  OutsideBall,
  DimensionMismatch,
  NumericOverflow,
  DegreeExceedsCapacity,
  InvalidConfig,
  // metrics
  NodeMismatch,
  DegenerateEmbedding,
  // restructuring
  EmptyRecommendationSet,
  DegenerateVariance,
  ValidationFailed,
  // llm service
  AuthMissing,
  Timeout,
  RateLimited,
  MalformedResponse,
  TransportError,
  InputTooLarge,
  ExhaustedAttempts,
  // files
  Io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::IndentJump: return "IndentJump";
    case ErrorCode::BadIndent: return "BadIndent";
    case ErrorCode::MultipleRoots: return "MultipleRoots";
    case ErrorCode::DuplicateNodeId: return "DuplicateNodeId";
    case ErrorCode::NoRoot: return "NoRoot";
    case ErrorCode::NoSource: return "NoSource";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::UnknownChild: return "UnknownChild";
    case ErrorCode::MultipleParents: return "MultipleParents";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::OutsideBall: return "OutsideBall";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NumericOverflow: return "NumericOverflow";
    case ErrorCode::DegreeExceedsCapacity: return "DegreeExceedsCapacity";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NodeMismatch: return "NodeMismatch";
    case ErrorCode::DegenerateEmbedding: return "DegenerateEmbedding";
    case ErrorCode::EmptyRecommendationSet: return "EmptyRecommendationSet";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::AuthMissing: return "AuthMissing";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::InputTooLarge: return "InputTooLarge";
    case ErrorCode::ExhaustedAttempts: return "ExhaustedAttempts";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Exception type for every failure raised by the library. Parse errors carry
/// the 1-based input line; other errors report line 0.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, int line = 0)
      : std::runtime_error(format(code, message, line)), code_(code), line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  int line() const noexcept { return line_; }

 private:
  static std::string format(ErrorCode code, const std::string& message, int line) {
    std::string out(to_string(code));
    if (line > 0) out += " at line " + std::to_string(line);
    out += ": ";
    out += message;
    return out;
  }

  ErrorCode code_;
  int line_;
};

}  // namespace hyperhier
