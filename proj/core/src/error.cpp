#include "tracemark/error.hpp"

namespace tracemark {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid_input";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kUnsupportedFormat: return "unsupported_format";
    case ErrorCode::kEmptySource: return "empty_source";
    case ErrorCode::kInsufficientFrames: return "insufficient_frames";
    case ErrorCode::kContentTooSimilar: return "content_too_similar";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kUnsupportedArchitecture: return "unsupported_architecture";
    case ErrorCode::kCorruption: return "corruption";
    case ErrorCode::kClockSkew: return "clock_skew";
    case ErrorCode::kCollision: return "collision";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kProtocol: return "protocol";
    case ErrorCode::kStartup: return "startup";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace tracemark
