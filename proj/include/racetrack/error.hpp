#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace racetrack {

enum class ErrorCode {
  InvalidArgument,
  EmptyHistory,
  InvalidHistory,
  Timeout,
  BackendUnavailable,
  MalformedResponse,
  EmptyResult,
  GenerationFailed,
  ReferenceTooShort,
  EmptyInput,
  DimensionMismatch,
  TooFewBots,
  SessionClosed,
  TurnPending,
  AllBotsFailed,
  AlreadySelected,
  InvalidSlot,
  NotFound,
  SchemaViolation,
  EmptyDataset,
  ParseError,
  PositiveLogProb,
  LengthMismatch,
  DegenerateScore,
  EmptyPool,
  StorageFailure,
  CorruptLog,
  ConfigError,
};

std::string_view error_code_name(ErrorCode code);

// Every failure surfaced by the library is an Error carrying a code. Backend
// and pipeline failures also carry the stage they happened in, and wrapped
// failures (GenerationFailed) keep the code of the underlying cause.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string stage = {},
        std::optional<ErrorCode> cause = std::nullopt)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        stage_(std::move(stage)),
        cause_(cause) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }
  std::optional<ErrorCode> cause() const noexcept { return cause_; }

 private:
  ErrorCode code_;
  std::string stage_;
  std::optional<ErrorCode> cause_;
};

}  // namespace racetrack
