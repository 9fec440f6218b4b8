#include <bit>
#include <cstring>
#include <string>

#include <zlib.h>

#include "io_util.hpp"
#include "tracemark/error.hpp"
#include "tracemark/nn.hpp"

namespace tracemark::nn {

namespace {

constexpr char kMagic[4] = {'T', 'N', 'N', '1'};

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void floats(const std::vector<float>& values) {
    u32(static_cast<std::uint32_t>(values.size()));
    for (float f : values) u32(std::bit_cast<std::uint32_t>(f));
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::vector<float> floats() {
    const std::uint32_t n = u32();
    if (n > (bytes_.size() - pos_) / 4) fail(ErrorCode::kFormat, "model file: tensor length exceeds file size");
    std::vector<float> out(n);
    for (float& f : out) f = std::bit_cast<float>(u32());
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(ErrorCode::kFormat, "model file: unexpected end of data");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace

std::vector<std::uint8_t> encode_model(const ModelSnapshot& model) {
  model.layer_shapes();
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u16(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(model.input.channels));
  w.u32(static_cast<std::uint32_t>(model.input.height));
  w.u32(static_cast<std::uint32_t>(model.input.width));
  w.u32(static_cast<std::uint32_t>(model.num_classes));
  w.u32(static_cast<std::uint32_t>(model.layers.size()));
  for (const Layer& l : model.layers) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.u32(static_cast<std::uint32_t>(l.out));
    w.u32(static_cast<std::uint32_t>(l.kernel));
    w.u32(static_cast<std::uint32_t>(l.stride));
    w.u32(static_cast<std::uint32_t>(l.window));
    w.floats(l.weights);
    w.floats(l.bias);
  }
  const std::uint32_t sum = crc(w.bytes());
  w.u32(sum);
  return std::move(w.bytes());
}

ModelSnapshot decode_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    fail(ErrorCode::kFormat, "not a TNN1 model file");
  }
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kModelFormatVersion) {
    fail(ErrorCode::kFormat, "unsupported model format version " + std::to_string(version));
  }
  if (bytes.size() < 10) fail(ErrorCode::kFormat, "model file too short");
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  if (crc(body) != tail.u32()) fail(ErrorCode::kCorruption, "model file checksum mismatch");

  Reader r(body);
  for (int i = 0; i < 4; ++i) r.u8();
  r.u16();
  ModelSnapshot m;
  m.input.channels = static_cast<int>(r.u32());
  m.input.height = static_cast<int>(r.u32());
  m.input.width = static_cast<int>(r.u32());
  m.num_classes = static_cast<int>(r.u32());
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    Layer l;
    const std::uint8_t kind = r.u8();
    if (kind < 1 || kind > 4) fail(ErrorCode::kFormat, "model file: unknown layer kind " + std::to_string(kind));
    l.kind = static_cast<LayerKind>(kind);
    l.out = static_cast<int>(r.u32());
    l.kernel = static_cast<int>(r.u32());
    l.stride = static_cast<int>(r.u32());
    l.window = static_cast<int>(r.u32());
    l.weights = r.floats();
    l.bias = r.floats();
    m.layers.push_back(std::move(l));
  }
  if (!r.done()) fail(ErrorCode::kFormat, "model file: trailing bytes before checksum");
  try {
    m.layer_shapes();
  } catch (const Error& e) {
    fail(ErrorCode::kFormat, std::string("model file: inconsistent layer table: ") + e.what());
  }
  return m;
}

void save(const ModelSnapshot& model, const std::filesystem::path& path) {
  detail::write_file(path, encode_model(model));
}

ModelSnapshot load(const std::filesystem::path& path) { return decode_model(detail::read_file(path)); }

}  // namespace tracemark::nn
