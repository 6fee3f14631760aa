#include "forpkg/error.h"

namespace forpkg {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownEntityType: return "UnknownEntityType";
    case ErrorCode::kUnknownRelationType: return "UnknownRelationType";
    case ErrorCode::kUnknownRelationLabel: return "UnknownRelationLabel";
    case ErrorCode::kSignatureViolation: return "SignatureViolation";
    case ErrorCode::kConflictingDefinition: return "ConflictingDefinition";
    case ErrorCode::kInvalidSchema: return "InvalidSchema";
    case ErrorCode::kEmptyMention: return "EmptyMention";
    case ErrorCode::kMissingEntity: return "MissingEntity";
    case ErrorCode::kInvalidProvenance: return "InvalidProvenance";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kUnreadableFile: return "UnreadableFile";
    case ErrorCode::kDuplicateDocId: return "DuplicateDocId";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kProviderError: return "ProviderError";
    case ErrorCode::kClientError: return "ClientError";
    case ErrorCode::kUnrecordedPrompt: return "UnrecordedPrompt";
    case ErrorCode::kUnparseableResponse: return "UnparseableResponse";
    case ErrorCode::kClassifierUnavailable: return "ClassifierUnavailable";
    case ErrorCode::kRelationWordNotFound: return "RelationWordNotFound";
    case ErrorCode::kEmptyTail: return "EmptyTail";
    case ErrorCode::kTailTypeUnresolved: return "TailTypeUnresolved";
    case ErrorCode::kNetworkForbidden: return "NetworkForbidden";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

namespace {

std::string decorate(ErrorCode code, const std::string& message,
                     std::optional<std::size_t> line) {
  std::string out(error_code_name(code));
  if (line) out += " (line " + std::to_string(*line) + ")";
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> line)
    : std::runtime_error(decorate(code, message, line)),
      code_(code),
      line_(line),
      message_(message) {}

}  // namespace forpkg
