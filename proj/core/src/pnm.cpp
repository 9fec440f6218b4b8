#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>

#include "io_util.hpp"
#include "tracemark/error.hpp"
#include "tracemark/media.hpp"

namespace tracemark::media {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  // Skips whitespace and '#' comments, then reads an unsigned integer.
  int next_int(const char* what) {
    skip_space_and_comments();
    std::size_t start = pos_;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) ++pos_;
    if (start == pos_) fail(ErrorCode::kFormat, std::string("PNM header: missing ") + what);
    int value = 0;
    auto [ptr, ec] = std::from_chars(reinterpret_cast<const char*>(bytes_.data() + start),
                                     reinterpret_cast<const char*>(bytes_.data() + pos_), value);
    if (ec != std::errc{}) fail(ErrorCode::kFormat, std::string("PNM header: bad ") + what);
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      fail(ErrorCode::kFormat, "PNM header: missing separator before raster");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

std::uint8_t rescale(std::uint8_t v, int maxval) {
  if (maxval == 255) return v;
  const int clamped = std::min<int>(v, maxval);
  return static_cast<std::uint8_t>((clamped * 255 + maxval / 2) / maxval);
}

std::optional<long long> numeric_stem(const std::filesystem::path& p) {
  const std::string stem = p.stem().string();
  if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return std::nullopt;
  }
  long long v = 0;
  auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), v);
  if (ec != std::errc{}) return std::nullopt;
  return v;
}

}  // namespace

RgbImage decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    fail(ErrorCode::kFormat, "not a binary PGM/PPM (expected P5 or P6)");
  }
  const bool color = bytes[1] == '6';
  HeaderReader header(bytes);
  const int width = header.next_int("width");
  const int height = header.next_int("height");
  const int maxval = header.next_int("maxval");
  if (width <= 0 || height <= 0) fail(ErrorCode::kFormat, "PNM header: zero dimension");
  if (maxval <= 0) fail(ErrorCode::kFormat, "PNM header: maxval must be positive");
  if (maxval > 255) fail(ErrorCode::kUnsupportedFormat, "PNM maxval > 255 is not supported");
  const std::size_t offset = header.raster_offset();
  const std::size_t channels = color ? 3 : 1;
  const std::size_t need = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - std::min(bytes.size(), offset) < need) {
    fail(ErrorCode::kTruncated, "PNM raster shorter than header dimensions");
  }
  RgbImage img(width, height);
  const std::uint8_t* src = bytes.data() + offset;
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  for (std::size_t i = 0; i < pixels; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      img.data[3 * i + c] = rescale(src[color ? 3 * i + c : i], maxval);
    }
  }
  return img;
}

RgbImage read_pnm(const std::filesystem::path& path) { return decode_pnm(detail::read_file(path)); }

std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data.begin(), img.data.end());
  return out;
}

std::vector<std::uint8_t> encode_pgm(const RgbImage& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const GrayImage gray = to_gray(img);
  for (double v : gray.data) out.push_back(static_cast<std::uint8_t>(std::lround(v)));
  return out;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  detail::write_file(path, encode_ppm(img));
}

FrameSequence load_frame_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    fail(ErrorCode::kEmptySource, "not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") files.push_back(entry.path());
  }
  if (files.empty()) fail(ErrorCode::kEmptySource, "no PGM/PPM frames in " + dir.string());

  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
    const auto na = numeric_stem(a);
    const auto nb = numeric_stem(b);
    if (na && nb) return *na != *nb ? *na < *nb : a.filename() < b.filename();
    if (na.has_value() != nb.has_value()) return na.has_value();
    return a.filename() < b.filename();
  });

  FrameSequence seq;
  seq.source_id = dir.filename().string();
  for (const auto& f : files) {
    RgbImage img = read_pnm(f);
    if (!seq.frames.empty() &&
        (img.width != seq.frames.front().width || img.height != seq.frames.front().height)) {
      fail(ErrorCode::kInvalidInput, "frame " + f.filename().string() + " has different dimensions");
    }
    seq.frames.push_back(std::move(img));
  }
  return seq;
}

}  // namespace tracemark::media
