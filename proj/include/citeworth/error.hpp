#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace citeworth {

enum class ErrorCode {
  MalformedXml,
  EmptyArticle,
  InsufficientData,
  InvalidArgument,
  EmptyVocabulary,
  DimensionMismatch,
  Io,
  SingleClass,
  NonFinite,
  FeatureSpaceMismatch,
  IndexOutOfRange,
  EmptyInput,
  NonFiniteLoss,
  LengthMismatch,
  FormatMismatch,
  BadArtifact,
};

std::string_view to_string(ErrorCode code);

/// All recoverable failures in the library are reported through this type.
/// The code identifies the failure class so callers (CLI exit codes, HTTP
/// status mapping, tests) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace citeworth
