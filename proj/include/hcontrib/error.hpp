#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hcontrib {

enum class ErrorKind {
  NonFiniteScore,
  ScoreMismatch,
  DegenerateOutput,
  InvalidThreshold,
  InvalidScores,
  ScoringFailed,
  SpanAlignment,
  InvalidRange,
  InvalidDistribution,
  InvalidArgument,
  EmptyCorpus,
  UnknownWord,
  ModelFormat,
  UnsupportedBackend,
  UnsupportedNullContext,
  UnsupportedTemperature,
  MissingLevel,
  InvalidAttack,
  ParseError,
  ValidationError,
  BatchFailed,
  EmptyInput,
  NoQualifyingPairs,
  ChainError,
  Io,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and the CLI
// exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Validation errors on line-oriented input keep the 1-based line and field.
class LineError : public Error {
 public:
  LineError(ErrorKind kind, std::size_t line, std::string field, const std::string& message)
      : Error(kind, "line " + std::to_string(line) + (field.empty() ? "" : " field '" + field + "'") +
                        ": " + message),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

}  // namespace hcontrib
