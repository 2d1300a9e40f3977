#pragma once

#include <stdexcept>
#include <string>

namespace topo {

enum class ErrorCode {
  NonSquareDimension,
  FractionOutOfRange,
  ShapeMismatch,
  NonFiniteInput,
  NonScalarLoss,
  TokenOutOfVocab,
  SequenceTooLong,
  EmptySequence,
  EmptyCorpus,
  DivergedLoss,
  DegenerateVariance,
  RankDeficient,
  TooFewPairs,
  SingleClassSplit,
  ZeroVarianceColumn,
  InvalidArgument,
  ConfigError,
  DataError,
  VocabMismatch,
  NonFiniteValue,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status.
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
    case ErrorCode::NonSquareDimension: return "NonSquareDimension";
    case ErrorCode::FractionOutOfRange: return "FractionOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NonScalarLoss: return "NonScalarLoss";
    case ErrorCode::TokenOutOfVocab: return "TokenOutOfVocab";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::SingleClassSplit: return "SingleClassSplit";
    case ErrorCode::ZeroVarianceColumn: return "ZeroVarianceColumn";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DataError: return "DataError";
    case ErrorCode::VocabMismatch: return "VocabMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
  }
  return "Unknown";
}

}  // namespace topo
