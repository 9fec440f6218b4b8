#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "tracemark/image.hpp"

namespace tracemark::phash {

inline constexpr int kSide = 32;
inline constexpr int kBlock = 8;

// 64-bit DCT perceptual hash. Bit (63 - (u*8 + v)) holds the comparison
// result for low-frequency coefficient (u, v): u is the vertical frequency
// (row), v the horizontal one (column).
class PerceptualHash {
 public:
  constexpr PerceptualHash() = default;
  constexpr explicit PerceptualHash(std::uint64_t bits) : bits_(bits) {}

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr bool bit(int u, int v) const { return (bits_ >> (63 - (u * kBlock + v))) & 1U; }

  /// 16 lowercase hex characters, most significant nibble first.
  std::string to_hex() const;
  static PerceptualHash from_hex(std::string_view hex);

  constexpr friend auto operator<=>(PerceptualHash, PerceptualHash) = default;

 private:
  std::uint64_t bits_ = 0;
};

/// Resize to 32x32 (bilinear) and convert to real-valued luminance.
GrayImage preprocess(const RgbImage& img);

/// DCT-II (orthonormal) of a 32x32 image, 8x8 low-frequency block compared
/// against the block mean (DC included); strict greater-than sets a bit.
PerceptualHash dct_phash(const GrayImage& img);

/// preprocess followed by dct_phash.
PerceptualHash hash_image(const RgbImage& img);

int hamming(PerceptualHash a, PerceptualHash b);

constexpr PerceptualHash operator^(PerceptualHash a, PerceptualHash b) {
  return PerceptualHash(a.bits() ^ b.bits());
}

inline PerceptualHash hash_xor(PerceptualHash a, PerceptualHash b) { return a ^ b; }

}  // namespace tracemark::phash
