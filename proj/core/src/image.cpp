#include <algorithm>
#include <cmath>

#include "tracemark/error.hpp"
#include "tracemark/image.hpp"

namespace tracemark {

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

Tap source_tap(int dst, int dst_size, int src_size) {
  double s = (dst + 0.5) * static_cast<double>(src_size) / dst_size - 0.5;
  s = std::clamp(s, 0.0, static_cast<double>(src_size - 1));
  const int lo = static_cast<int>(std::floor(s));
  const int hi = std::min(lo + 1, src_size - 1);
  return {lo, hi, s - lo};
}

double lerp(double a, double b, double t) { return a == b ? a : a + t * (b - a); }

}  // namespace

RealRgbImage resize_bilinear(const RgbImage& img, int out_width, int out_height) {
  if (img.empty() || out_width <= 0 || out_height <= 0) {
    fail(ErrorCode::kInvalidInput, "resize_bilinear: zero-dimension image");
  }
  if (img.data.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
    fail(ErrorCode::kInvalidInput, "resize_bilinear: pixel buffer does not match dimensions");
  }
  RealRgbImage out{out_width, out_height,
                   std::vector<double>(static_cast<std::size_t>(out_width) * out_height * 3)};
  for (int y = 0; y < out_height; ++y) {
    const Tap ty = source_tap(y, out_height, img.height);
    for (int x = 0; x < out_width; ++x) {
      const Tap tx = source_tap(x, out_width, img.width);
      const std::uint8_t* p00 = img.pixel(tx.lo, ty.lo);
      const std::uint8_t* p10 = img.pixel(tx.hi, ty.lo);
      const std::uint8_t* p01 = img.pixel(tx.lo, ty.hi);
      const std::uint8_t* p11 = img.pixel(tx.hi, ty.hi);
      double* dst = &out.data[(static_cast<std::size_t>(y) * out_width + x) * 3];
      for (int c = 0; c < 3; ++c) {
        const double top = lerp(p00[c], p10[c], tx.frac);
        const double bottom = lerp(p01[c], p11[c], tx.frac);
        dst[c] = lerp(top, bottom, ty.frac);
      }
    }
  }
  return out;
}

namespace {

// Integer weights keep equal-channel inputs exact (299 + 587 + 114 = 1000).
double luma(double r, double g, double b) { return (299.0 * r + 587.0 * g + 114.0 * b) / 1000.0; }

}  // namespace

GrayImage to_gray(const RealRgbImage& img) {
  GrayImage out(img.width, img.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = luma(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2]);
  }
  return out;
}

GrayImage to_gray(const RgbImage& img) {
  GrayImage out(img.width, img.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = luma(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2]);
  }
  return out;
}

}  // namespace tracemark
