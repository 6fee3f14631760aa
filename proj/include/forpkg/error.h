#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace forpkg {

enum class ErrorCode {
  kUnknownEntityType,
  kUnknownRelationType,
  kUnknownRelationLabel,
  kSignatureViolation,
  kConflictingDefinition,
  kInvalidSchema,
  kEmptyMention,
  kMissingEntity,
  kInvalidProvenance,
  kParseError,
  kUnreadableFile,
  kDuplicateDocId,
  kDimMismatch,
  kZeroVector,
  kProviderError,
  kClientError,
  kUnrecordedPrompt,
  kUnparseableResponse,
  kClassifierUnavailable,
  kRelationWordNotFound,
  kEmptyTail,
  kTailTypeUnresolved,
  kNetworkForbidden,
  kInvalidConfig,
};

std::string_view error_code_name(ErrorCode code);

// All library failures surface as forpkg::Error. `line()` is set for
// errors raised while reading line-oriented files.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  const std::string& message() const noexcept { return message_; }  // undecorated

 private:
  ErrorCode code_;
  std::optional<std::size_t> line_;
  std::string message_;
};

}  // namespace forpkg
