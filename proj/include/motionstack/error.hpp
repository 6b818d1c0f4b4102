#pragma once

#include <stdexcept>
#include <string>

namespace motionstack {

// Broad failure classes; the CLI maps these onto its exit codes.
enum class ErrorKind {
  Usage,       // bad argument values
  Validation,  // input data violates a contract
  Io,          // filesystem failures
};

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  MalformedHeader,
  UnsupportedFormat,
  BadMaxval,
  TruncatedPayload,
  BadFrameName,
  BadMagic,
  CorruptContainer,
  UnknownDType,
  MissingFrame,
  MissingLabel,
  DegenerateBox,
  BadRecord,
  OutOfOrder,
  IoFailure,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::MalformedHeader: return "malformed-header";
    case ErrorCode::UnsupportedFormat: return "unsupported-format";
    case ErrorCode::BadMaxval: return "bad-maxval";
    case ErrorCode::TruncatedPayload: return "truncated-payload";
    case ErrorCode::BadFrameName: return "bad-frame-name";
    case ErrorCode::BadMagic: return "bad-magic";
    case ErrorCode::CorruptContainer: return "corrupt-container";
    case ErrorCode::UnknownDType: return "unknown-dtype";
    case ErrorCode::MissingFrame: return "missing-frame";
    case ErrorCode::MissingLabel: return "missing-label";
    case ErrorCode::DegenerateBox: return "degenerate-box";
    case ErrorCode::BadRecord: return "bad-record";
    case ErrorCode::OutOfOrder: return "out-of-order";
    case ErrorCode::IoFailure: return "io-failure";
  }
  return "unknown";
}

inline ErrorKind kind_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return ErrorKind::Usage;
    case ErrorCode::IoFailure: return ErrorKind::Io;
    default: return ErrorKind::Validation;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorKind kind() const noexcept { return kind_of(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace motionstack
