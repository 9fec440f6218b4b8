#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>

#include "io_util.hpp"
#include "tracemark/error.hpp"
#include "tracemark/media.hpp"

namespace tracemark::media {

namespace {

constexpr std::string_view kMagic = "YUV4MPEG2";
constexpr std::string_view kFrameTag = "FRAME";

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
}

int parse_int(std::string_view s, const char* what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    fail(ErrorCode::kFormat, std::string("y4m header: bad ") + what);
  }
  return v;
}

struct Header {
  int width = 0;
  int height = 0;
  Chroma chroma = Chroma::k420;
};

Header parse_header(std::string_view line) {
  Header h;
  std::size_t pos = kMagic.size();
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    if (pos >= line.size()) break;
    std::size_t end = line.find(' ', pos);
    if (end == std::string_view::npos) end = line.size();
    const std::string_view token = line.substr(pos, end - pos);
    pos = end;
    const std::string_view value = token.substr(1);
    switch (token[0]) {
      case 'W': h.width = parse_int(value, "width"); break;
      case 'H': h.height = parse_int(value, "height"); break;
      case 'C':
        if (value == "444") {
          h.chroma = Chroma::k444;
        } else if (value == "420" || value == "420jpeg" || value == "420mpeg2" || value == "420paldv") {
          h.chroma = Chroma::k420;
        } else {
          fail(ErrorCode::kUnsupportedFormat, "y4m chroma mode C" + std::string(value) + " not supported");
        }
        break;
      default: break;  // F, I, A, X carry no information we need
    }
  }
  if (h.width <= 0 || h.height <= 0) fail(ErrorCode::kFormat, "y4m header: missing W/H");
  return h;
}

}  // namespace

FrameSequence decode_y4m(std::span<const std::uint8_t> bytes, std::string source_id) {
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (text.substr(0, kMagic.size()) != kMagic ||
      (text.size() > kMagic.size() && text[kMagic.size()] != ' ' && text[kMagic.size()] != '\n')) {
    fail(ErrorCode::kFormat, "missing YUV4MPEG2 signature");
  }
  const std::size_t header_end = text.find('\n');
  if (header_end == std::string_view::npos) fail(ErrorCode::kTruncated, "y4m header not terminated");
  const Header h = parse_header(text.substr(0, header_end));

  const std::size_t luma = static_cast<std::size_t>(h.width) * h.height;
  const int cw = h.chroma == Chroma::k444 ? h.width : (h.width + 1) / 2;
  const int ch = h.chroma == Chroma::k444 ? h.height : (h.height + 1) / 2;
  const std::size_t chroma = static_cast<std::size_t>(cw) * ch;
  const std::size_t payload = luma + 2 * chroma;

  FrameSequence seq;
  seq.source_id = std::move(source_id);
  std::size_t pos = header_end + 1;
  while (pos < text.size()) {
    const std::size_t index = seq.frames.size();
    if (text.substr(pos, kFrameTag.size()) != kFrameTag) {
      if (text.size() - pos < kFrameTag.size() && kFrameTag.substr(0, text.size() - pos) == text.substr(pos)) {
        fail(ErrorCode::kTruncated, "y4m frame " + std::to_string(index) + ": truncated FRAME marker");
      }
      fail(ErrorCode::kFormat, "y4m frame " + std::to_string(index) + ": expected FRAME marker");
    }
    const std::size_t line_end = text.find('\n', pos);
    if (line_end == std::string_view::npos) {
      fail(ErrorCode::kTruncated, "y4m frame " + std::to_string(index) + ": header not terminated");
    }
    pos = line_end + 1;
    if (bytes.size() - pos < payload) {
      fail(ErrorCode::kTruncated, "y4m frame " + std::to_string(index) + ": payload truncated");
    }
    const std::uint8_t* y_plane = bytes.data() + pos;
    const std::uint8_t* cb_plane = y_plane + luma;
    const std::uint8_t* cr_plane = cb_plane + chroma;
    RgbImage img(h.width, h.height);
    for (int y = 0; y < h.height; ++y) {
      for (int x = 0; x < h.width; ++x) {
        const std::size_t ci = h.chroma == Chroma::k444
                                   ? static_cast<std::size_t>(y) * cw + x
                                   : static_cast<std::size_t>(y / 2) * cw + x / 2;
        const double Y = y_plane[static_cast<std::size_t>(y) * h.width + x];
        const double cb = cb_plane[ci] - 128.0;
        const double cr = cr_plane[ci] - 128.0;
        std::uint8_t* px = img.pixel(x, y);
        px[0] = clamp_byte(Y + 1.402 * cr);
        px[1] = clamp_byte(Y - 0.344136 * cb - 0.714136 * cr);
        px[2] = clamp_byte(Y + 1.772 * cb);
      }
    }
    seq.frames.push_back(std::move(img));
    pos += payload;
  }
  return seq;
}

FrameSequence read_y4m(const std::filesystem::path& path) {
  return decode_y4m(detail::read_file(path), path.stem().string());
}

std::vector<std::uint8_t> encode_y4m(const FrameSequence& seq, Chroma chroma, int fps_num, int fps_den) {
  if (seq.frames.empty()) fail(ErrorCode::kInvalidInput, "encode_y4m: no frames");
  const int w = seq.frames.front().width;
  const int h = seq.frames.front().height;
  std::string header = std::string(kMagic) + " W" + std::to_string(w) + " H" + std::to_string(h) +
                       " F" + std::to_string(fps_num) + ":" + std::to_string(fps_den) + " Ip A1:1 " +
                       (chroma == Chroma::k444 ? "C444" : "C420jpeg") + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());

  const int cw = chroma == Chroma::k444 ? w : (w + 1) / 2;
  const int chh = chroma == Chroma::k444 ? h : (h + 1) / 2;
  for (const RgbImage& img : seq.frames) {
    if (img.width != w || img.height != h) fail(ErrorCode::kInvalidInput, "encode_y4m: mixed dimensions");
    out.insert(out.end(), kFrameTag.begin(), kFrameTag.end());
    out.push_back('\n');
    std::vector<double> cb(static_cast<std::size_t>(w) * h), cr(cb.size());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::uint8_t* p = img.pixel(x, y);
        const double r = p[0], g = p[1], b = p[2];
        out.push_back(clamp_byte(0.299 * r + 0.587 * g + 0.114 * b));
        cb[static_cast<std::size_t>(y) * w + x] = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
        cr[static_cast<std::size_t>(y) * w + x] = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
      }
    }
    for (const auto* plane : {&cb, &cr}) {
      for (int cy = 0; cy < chh; ++cy) {
        for (int cx = 0; cx < cw; ++cx) {
          if (chroma == Chroma::k444) {
            out.push_back(clamp_byte((*plane)[static_cast<std::size_t>(cy) * w + cx]));
            continue;
          }
          double sum = 0.0;
          int n = 0;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const int sx = 2 * cx + dx, sy = 2 * cy + dy;
              if (sx < w && sy < h) {
                sum += (*plane)[static_cast<std::size_t>(sy) * w + sx];
                ++n;
              }
            }
          }
          out.push_back(clamp_byte(sum / n));
        }
      }
    }
  }
  return out;
}

FrameSequence load_frames(const std::filesystem::path& path) {
  std::error_code ec;
  if (std::filesystem::is_directory(path, ec)) return load_frame_dir(path);
  return read_y4m(path);
}

}  // namespace tracemark::media
