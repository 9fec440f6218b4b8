#include <algorithm>
#include <cmath>
#include <string>

#include "io_util.hpp"
#include "tracemark/error.hpp"
#include "tracemark/nn.hpp"

namespace tracemark::nn {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at, const char* what) {
  if (b.size() < at + 4) fail(ErrorCode::kTruncated, std::string("IDX ") + what + ": header truncated");
  return (static_cast<std::uint32_t>(b[at]) << 24) | (static_cast<std::uint32_t>(b[at + 1]) << 16) |
         (static_cast<std::uint32_t>(b[at + 2]) << 8) | b[at + 3];
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

}  // namespace

LabeledDataset decode_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                          int min_classes) {
  if (be32(images, 0, "images") != kImageMagic) fail(ErrorCode::kFormat, "IDX images: bad magic");
  if (be32(labels, 0, "labels") != kLabelMagic) fail(ErrorCode::kFormat, "IDX labels: bad magic");
  const std::uint32_t count = be32(images, 4, "images");
  const std::uint32_t rows = be32(images, 8, "images");
  const std::uint32_t cols = be32(images, 12, "images");
  const std::uint32_t label_count = be32(labels, 4, "labels");
  if (count != label_count) {
    fail(ErrorCode::kInvalidInput, "IDX count mismatch: " + std::to_string(count) + " images vs " +
                                       std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  if (images.size() - 16 < pixels * count) fail(ErrorCode::kTruncated, "IDX images: payload truncated");
  if (labels.size() - 8 < count) fail(ErrorCode::kTruncated, "IDX labels: payload truncated");

  LabeledDataset data;
  data.shape = {1, static_cast<int>(rows), static_cast<int>(cols)};
  data.inputs.resize(pixels * count);
  data.labels.resize(count);
  for (std::size_t i = 0; i < pixels * count; ++i) data.inputs[i] = static_cast<float>(images[16 + i] / 255.0);
  int max_label = -1;
  for (std::size_t i = 0; i < count; ++i) {
    data.labels[i] = labels[8 + i];
    max_label = std::max(max_label, data.labels[i]);
  }
  data.num_classes = std::max(min_classes, max_label + 1);
  return data;
}

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        int min_classes) {
  return decode_idx(detail::read_file(images), detail::read_file(labels), min_classes);
}

void write_idx(const LabeledDataset& data, const std::filesystem::path& images,
               const std::filesystem::path& labels) {
  if (data.shape.channels != 1) fail(ErrorCode::kInvalidInput, "write_idx: only single-channel data");
  std::vector<std::uint8_t> img;
  img.reserve(16 + data.inputs.size());
  put_be32(img, kImageMagic);
  put_be32(img, static_cast<std::uint32_t>(data.size()));
  put_be32(img, static_cast<std::uint32_t>(data.shape.height));
  put_be32(img, static_cast<std::uint32_t>(data.shape.width));
  for (float v : data.inputs) {
    img.push_back(static_cast<std::uint8_t>(std::clamp<long>(std::lround(v * 255.0), 0, 255)));
  }
  std::vector<std::uint8_t> lab;
  put_be32(lab, kLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (int y : data.labels) lab.push_back(static_cast<std::uint8_t>(y));
  detail::write_file(images, img);
  detail::write_file(labels, lab);
}

}  // namespace tracemark::nn
