#pragma once

#include <stdexcept>
#include <string>

namespace ips {

enum class ErrorCode {
  kMalformedLine,
  kSchemaViolation,
  kNegativeTime,
  kTooFewAnchors,
  kCollinearAnchors,
  kEmptyObservations,
  kInvalidOverride,
  kInvalidConfig,
  kInsufficientOverlap,
  kEmptyGroundTruth,
  kDimensionMismatch,
  kEmptyMap,
  kInsufficientData,
  kTooFewFrames,
  kDivergence,
  kLengthMismatch,
  kEmpty,
  kLayoutMismatch,
  kIoError,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so
// callers (and the CLI exit-code mapping) can branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ips
