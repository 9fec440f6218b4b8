#pragma once

#include <cstdint>
#include <vector>

namespace tracemark {

// Row-major interleaved RGB, 8 bits per channel.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  bool empty() const { return width <= 0 || height <= 0; }
  std::uint8_t* pixel(int x, int y) { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* pixel(int x, int y) const {
    return &data[(static_cast<std::size_t>(y) * width + x) * 3];
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

// Row-major luminance, real-valued in [0, 255].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

// Real-valued RGB planes produced by resampling; kept unrounded.
struct RealRgbImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // interleaved r,g,b
};

/// Bilinear resampling with pixel-centre alignment
/// (source coordinate = (dst + 0.5) * src / dst - 0.5, clamped to the edge).
RealRgbImage resize_bilinear(const RgbImage& img, int out_width, int out_height);

/// Luminance 0.299 R + 0.587 G + 0.114 B without rounding.
GrayImage to_gray(const RealRgbImage& img);
GrayImage to_gray(const RgbImage& img);

}  // namespace tracemark
