#include "tracemark/phash.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "tracemark/error.hpp"

namespace tracemark::phash {

namespace {

using Basis = std::array<std::array<double, kSide>, kBlock>;

// Orthonormal DCT-II rows for the 8 lowest frequencies.
const Basis& basis() {
  static const Basis table = [] {
    Basis b{};
    for (int k = 0; k < kBlock; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / kSide) : std::sqrt(2.0 / kSide);
      for (int n = 0; n < kSide; ++n) {
        b[k][n] = scale * std::cos(std::numbers::pi * (2 * n + 1) * k / (2.0 * kSide));
      }
    }
    return b;
  }();
  return table;
}

}  // namespace

std::string PerceptualHash::to_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(bits_));
  return std::string(buf, 16);
}

PerceptualHash PerceptualHash::from_hex(std::string_view hex) {
  if (hex.size() != 16) fail(ErrorCode::kInvalidInput, "hash hex must be 16 characters");
  std::uint64_t v = 0;
  for (char c : hex) {
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
    else fail(ErrorCode::kInvalidInput, "hash hex contains a non-hex character");
    v = (v << 4) | static_cast<std::uint64_t>(d);
  }
  return PerceptualHash(v);
}

GrayImage preprocess(const RgbImage& img) {
  if (img.empty()) fail(ErrorCode::kInvalidInput, "preprocess: zero-dimension image");
  return to_gray(resize_bilinear(img, kSide, kSide));
}

PerceptualHash dct_phash(const GrayImage& img) {
  if (img.width != kSide || img.height != kSide ||
      img.data.size() != static_cast<std::size_t>(kSide) * kSide) {
    fail(ErrorCode::kInvalidInput, "dct_phash: image must be 32x32");
  }
  const Basis& b = basis();

  // Horizontal pass: rows x 8 horizontal frequencies.
  std::array<std::array<double, kBlock>, kSide> rows{};
  for (int y = 0; y < kSide; ++y) {
    for (int v = 0; v < kBlock; ++v) {
      double acc = 0.0;
      for (int x = 0; x < kSide; ++x) acc += img.at(x, y) * b[v][x];
      rows[y][v] = acc;
    }
  }
  std::array<double, kBlock * kBlock> coeff{};
  double sum = 0.0;
  for (int u = 0; u < kBlock; ++u) {
    for (int v = 0; v < kBlock; ++v) {
      double acc = 0.0;
      for (int y = 0; y < kSide; ++y) acc += b[u][y] * rows[y][v];
      coeff[u * kBlock + v] = acc;
      sum += acc;
    }
  }
  const double ave = sum / (kBlock * kBlock);

  std::uint64_t bits = 0;
  for (int i = 0; i < kBlock * kBlock; ++i) {
    if (coeff[i] > ave) bits |= std::uint64_t{1} << (63 - i);
  }
  return PerceptualHash(bits);
}

PerceptualHash hash_image(const RgbImage& img) { return dct_phash(preprocess(img)); }

int hamming(PerceptualHash a, PerceptualHash b) { return std::popcount(a.bits() ^ b.bits()); }

}  // namespace tracemark::phash
