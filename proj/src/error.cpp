#include "hcontrib/error.hpp"

namespace hcontrib {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonFiniteScore: return "NonFiniteScore";
    case ErrorKind::ScoreMismatch: return "ScoreMismatch";
    case ErrorKind::DegenerateOutput: return "DegenerateOutput";
    case ErrorKind::InvalidThreshold: return "InvalidThreshold";
    case ErrorKind::InvalidScores: return "InvalidScores";
    case ErrorKind::ScoringFailed: return "ScoringFailed";
    case ErrorKind::SpanAlignment: return "SpanAlignment";
    case ErrorKind::InvalidRange: return "InvalidRange";
    case ErrorKind::InvalidDistribution: return "InvalidDistribution";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::UnknownWord: return "UnknownWord";
    case ErrorKind::ModelFormat: return "ModelFormat";
    case ErrorKind::UnsupportedBackend: return "UnsupportedBackend";
    case ErrorKind::UnsupportedNullContext: return "UnsupportedNullContext";
    case ErrorKind::UnsupportedTemperature: return "UnsupportedTemperature";
    case ErrorKind::MissingLevel: return "MissingLevel";
    case ErrorKind::InvalidAttack: return "InvalidAttack";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::BatchFailed: return "BatchFailed";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::NoQualifyingPairs: return "NoQualifyingPairs";
    case ErrorKind::ChainError: return "ChainError";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace hcontrib
