#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tracemark::digest {

/// Lowercase hex SHA-256 (64 characters).
std::string sha256_hex(std::string_view data);

/// Standard alphabet with padding.
std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws kInvalidInput on characters outside the alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace tracemark::digest
