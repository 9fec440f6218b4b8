#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tracemark {

enum class ErrorCode {
  kInvalidInput,
  kFormat,
  kTruncated,
  kUnsupportedFormat,
  kEmptySource,
  kInsufficientFrames,
  kContentTooSimilar,
  kDivergence,
  kUnsupportedArchitecture,
  kCorruption,
  kClockSkew,
  kCollision,
  kIo,
  kTransport,
  kProtocol,
  kStartup,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (and the CLI) can branch on the category without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace tracemark
