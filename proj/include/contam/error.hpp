#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace contam {

enum class Errc {
  MissingField,
  FormatMismatch,
  EmptySequence,
  EmptyCorpus,
  EmptyDataset,
  BackendUnavailable,
  ContextOverflow,
  HttpError,
  ProtocolError,
  RateLimited,
  NetworkError,
  PageMissing,
  NoRevisionBefore,
  InsufficientPages,
  TooShort,
  DegenerateBaselines,
  InvalidThresholds,
  InvalidArgument,
  ConfigError,
  FormatVersion,
  IoError,
  BatchAborted,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MissingField: return "MissingField";
    case Errc::FormatMismatch: return "FormatMismatch";
    case Errc::EmptySequence: return "EmptySequence";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::ContextOverflow: return "ContextOverflow";
    case Errc::HttpError: return "HttpError";
    case Errc::ProtocolError: return "ProtocolError";
    case Errc::RateLimited: return "RateLimited";
    case Errc::NetworkError: return "NetworkError";
    case Errc::PageMissing: return "PageMissing";
    case Errc::NoRevisionBefore: return "NoRevisionBefore";
    case Errc::InsufficientPages: return "InsufficientPages";
    case Errc::TooShort: return "TooShort";
    case Errc::DegenerateBaselines: return "DegenerateBaselines";
    case Errc::InvalidThresholds: return "InvalidThresholds";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ConfigError: return "ConfigError";
    case Errc::FormatVersion: return "FormatVersion";
    case Errc::IoError: return "IoError";
    case Errc::BatchAborted: return "BatchAborted";
  }
  return "Unknown";
}

inline Errc parse_errc(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(Errc::BatchAborted); ++i) {
    if (to_string(static_cast<Errc>(i)) == s) return static_cast<Errc>(i);
  }
  return Errc::InvalidArgument;
}

// Single exception type for the library. The code classifies the failure,
// the stage (optional) records which pipeline stage raised it.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  const std::string& stage() const noexcept { return stage_; }

  Error with_stage(std::string stage) const {
    Error copy = *this;
    copy.stage_ = std::move(stage);
    return copy;
  }

 private:
  Errc code_;
  std::string detail_;
  std::string stage_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace contam
