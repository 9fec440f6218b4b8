#include "tracemark/ledger.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "tracemark/digest.hpp"
#include "tracemark/error.hpp"

namespace tracemark::ledger {

namespace {

using Json = nlohmann::json;

std::filesystem::path head_path(const std::filesystem::path& p) {
  std::filesystem::path h = p;
  h += ".head";
  return h;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::vector<std::string> lines;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return lines;
    fail(ErrorCode::kIo, "cannot read ledger " + path.string());
  }
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

struct Head {
  std::uint64_t seq = 0;
  std::string digest;
};

std::optional<Head> read_head(const std::filesystem::path& path) {
  std::ifstream in(head_path(path));
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    const Json j = Json::parse(ss.str());
    return Head{j.at("seq").get<std::uint64_t>(), j.at("digest").get<std::string>()};
  } catch (const Json::exception&) {
    return Head{UINT64_MAX, ""};
  }
}

class Fd {
 public:
  Fd(const std::filesystem::path& p, int flags) : fd_(::open(p.c_str(), flags, 0644)) {
    if (fd_ < 0) fail(ErrorCode::kIo, "cannot open " + p.string() + ": " + std::strerror(errno));
  }
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;

  int get() const { return fd_; }

  void write_all(std::string_view data) {
    while (!data.empty()) {
      const ssize_t n = ::write(fd_, data.data(), data.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(ErrorCode::kIo, std::string("ledger write failed: ") + std::strerror(errno));
      }
      data.remove_prefix(static_cast<std::size_t>(n));
    }
  }
  void sync() {
    if (::fsync(fd_) != 0) fail(ErrorCode::kIo, std::string("fsync failed: ") + std::strerror(errno));
  }

 private:
  int fd_;
};

void write_head(const std::filesystem::path& path, std::uint64_t seq, const std::string& digest) {
  Json j;
  j["seq"] = seq;
  j["digest"] = digest;
  std::filesystem::path tmp = head_path(path);
  tmp += ".tmp";
  {
    Fd fd(tmp, O_WRONLY | O_CREAT | O_TRUNC);
    fd.write_all(j.dump() + "\n");
    fd.sync();
  }
  std::filesystem::rename(tmp, head_path(path));
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  Fd dfd(dir, O_RDONLY | O_DIRECTORY);
  ::fsync(dfd.get());
}

std::time_t parse_utc(const std::string& ts) {
  std::tm tm{};
  std::istringstream in(ts);
  in >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  if (in.fail()) fail(ErrorCode::kFormat, "bad ledger timestamp " + ts);
  return timegm(&tm);
}

}  // namespace

std::string LedgerRecord::canonical_line() const {
  nlohmann::ordered_json j;
  j["seq"] = seq;
  j["timestamp"] = timestamp;
  j["owner_id"] = owner_id;
  j["p_hex"] = p_hex;
  j["prev_digest"] = prev_digest;
  j["note"] = note;
  return j.dump();
}

LedgerRecord LedgerRecord::parse(std::string_view line) {
  try {
    const Json j = Json::parse(line);
    LedgerRecord r;
    r.seq = j.at("seq").get<std::uint64_t>();
    r.timestamp = j.at("timestamp").get<std::string>();
    r.owner_id = j.at("owner_id").get<std::string>();
    r.p_hex = j.at("p_hex").get<std::string>();
    r.prev_digest = j.at("prev_digest").get<std::string>();
    r.note = j.at("note").get<std::string>();
    if (j.size() != 6) fail(ErrorCode::kFormat, "ledger record has unexpected fields");
    phash::PerceptualHash::from_hex(r.p_hex);
    return r;
  } catch (const Json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed ledger record: ") + e.what());
  }
}

std::string format_utc(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

// Shared lock for readers; a missing store needs none.
std::unique_ptr<Fd> lock_shared(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return nullptr;
  auto fd = std::make_unique<Fd>(path, O_RDONLY);
  if (::flock(fd->get(), LOCK_SH) != 0) fail(ErrorCode::kIo, "cannot lock ledger " + path.string());
  return fd;
}

ChainStatus verify_unlocked(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  ChainStatus status;
  status.records = lines.size();
  auto bad = [&](std::uint64_t seq, std::string reason) {
    status.ok = false;
    status.first_bad_seq = seq;
    status.reason = std::move(reason);
    return status;
  };

  std::string prev(kGenesisDigest);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::uint64_t expected_seq = i + 1;
    LedgerRecord rec;
    try {
      rec = LedgerRecord::parse(lines[i]);
    } catch (const Error& e) {
      return bad(expected_seq, e.what());
    }
    if (rec.seq != expected_seq) return bad(expected_seq, "sequence number out of order");
    if (rec.prev_digest != prev) return bad(expected_seq, "prev_digest does not match predecessor");
    prev = digest::sha256_hex(lines[i]);
  }

  const std::optional<Head> head = read_head(path);
  if (!head) {
    if (!lines.empty()) return bad(lines.size(), "head file missing");
    return status;
  }
  if (head->seq > lines.size()) return bad(lines.size() + 1, "records missing after the last line");
  if (head->seq < lines.size()) return bad(head->seq + 1, "records appended without updating the head");
  if (head->digest != prev) return bad(lines.size(), "newest record does not match the head digest");
  return status;
}

}  // namespace

ChainStatus verify_chain(const std::filesystem::path& path) {
  const auto lock = lock_shared(path);
  return verify_unlocked(path);
}

Ledger Ledger::open(const std::filesystem::path& path, Clock clock) {
  if (!clock) clock = [] { return std::chrono::system_clock::now(); };
  Ledger l(path, std::move(clock));
  const auto lock = lock_shared(path);
  l.reload();
  return l;
}

void Ledger::reload() {
  const ChainStatus status = verify_unlocked(path_);
  if (!status.ok) {
    fail(ErrorCode::kCorruption, "ledger chain broken at seq " + std::to_string(*status.first_bad_seq) + ": " +
                                     status.reason);
  }
  records_.clear();
  tip_digest_ = std::string(kGenesisDigest);
  for (const std::string& line : read_lines(path_)) {
    records_.push_back(LedgerRecord::parse(line));
    tip_digest_ = digest::sha256_hex(line);
  }
}

LedgerRecord Ledger::append(const std::string& owner_id, phash::PerceptualHash p, const std::string& note) {
  if (path_.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path_.parent_path(), ec);
  }
  Fd fd(path_, O_WRONLY | O_APPEND | O_CREAT);
  if (::flock(fd.get(), LOCK_EX) != 0) fail(ErrorCode::kIo, "cannot lock ledger " + path_.string());
  reload();  // pick up appends made by other writers, re-verifying the chain

  const auto now = clock_();
  if (!records_.empty() && std::chrono::system_clock::to_time_t(now) < parse_utc(records_.back().timestamp)) {
    fail(ErrorCode::kClockSkew, "clock is behind the last ledger record (" + records_.back().timestamp + ")");
  }
  LedgerRecord rec;
  rec.seq = records_.size() + 1;
  rec.timestamp = format_utc(now);
  rec.owner_id = owner_id;
  rec.p_hex = p.to_hex();
  rec.prev_digest = tip_digest_;
  rec.note = note;
  const std::string line = rec.canonical_line();
  fd.write_all(line + "\n");
  fd.sync();
  tip_digest_ = digest::sha256_hex(line);
  write_head(path_, rec.seq, tip_digest_);
  records_.push_back(rec);
  return rec;
}

std::optional<LedgerRecord> Ledger::find_earliest(phash::PerceptualHash p) const {
  const std::string hex = p.to_hex();
  for (const LedgerRecord& r : records_) {
    if (r.p_hex == hex) return r;
  }
  return std::nullopt;
}

phash::PerceptualHash fingerprint_bind(const RgbImage& trigger_img, const RgbImage& owner_fp_img) {
  return phash::hash_image(trigger_img) ^ phash::hash_image(owner_fp_img);
}

std::optional<LedgerRecord> verify_ownership(const Ledger& store, const RgbImage& trigger_img,
                                             const RgbImage& owner_fp_img) {
  return store.find_earliest(fingerprint_bind(trigger_img, owner_fp_img));
}

}  // namespace tracemark::ledger
