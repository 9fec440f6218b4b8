#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracemark/image.hpp"
#include "tracemark/phash.hpp"

namespace tracemark::ledger {

inline constexpr std::string_view kGenesisDigest =
    "0000000000000000000000000000000000000000000000000000000000000000";

struct LedgerRecord {
  std::uint64_t seq = 0;
  std::string timestamp;  // YYYY-MM-DDTHH:MM:SSZ
  std::string owner_id;
  std::string p_hex;        // 16 hex characters
  std::string prev_digest;  // SHA-256 of the previous canonical line
  std::string note;

  /// Serialized NDJSON line (no trailing newline); these exact bytes are
  /// what the successor's prev_digest covers.
  std::string canonical_line() const;
  static LedgerRecord parse(std::string_view line);

  friend bool operator==(const LedgerRecord&, const LedgerRecord&) = default;
};

struct ChainStatus {
  bool ok = true;
  std::optional<std::uint64_t> first_bad_seq;  // first record whose link fails, or the first missing one
  std::string reason;
  std::size_t records = 0;
};

/// Walks the store and recomputes every link. The tip digest lives in a
/// sidecar "<path>.head" so that tampering with the newest record is
/// detected as well. A missing store is an empty, valid chain.
ChainStatus verify_chain(const std::filesystem::path& path);

using Clock = std::function<std::chrono::system_clock::time_point()>;

std::string format_utc(std::chrono::system_clock::time_point t);

// Hash-chained append-only NDJSON store. One writer at a time (guarded by
// an advisory file lock); readers work on the snapshot loaded at open().
class Ledger {
 public:
  /// Verifies the chain; throws kCorruption naming the first bad record.
  static Ledger open(const std::filesystem::path& path, Clock clock = {});

  const std::vector<LedgerRecord>& records() const { return records_; }
  const std::filesystem::path& path() const { return path_; }

  /// Appends with the current timestamp; the record and the head are fsynced
  /// before returning. Throws kClockSkew if the clock is behind the last record.
  LedgerRecord append(const std::string& owner_id, phash::PerceptualHash p, const std::string& note);

  /// Lowest-seq record holding `p`.
  std::optional<LedgerRecord> find_earliest(phash::PerceptualHash p) const;

 private:
  Ledger(std::filesystem::path path, Clock clock) : path_(std::move(path)), clock_(std::move(clock)) {}
  void reload();

  std::filesystem::path path_;
  Clock clock_;
  std::vector<LedgerRecord> records_;
  std::string tip_digest_{kGenesisDigest};
};

/// P = pHash(trigger) XOR pHash(owner fingerprint).
phash::PerceptualHash fingerprint_bind(const RgbImage& trigger_img, const RgbImage& owner_fp_img);

/// Recomputes P' for the pair and returns the earliest record storing it.
std::optional<LedgerRecord> verify_ownership(const Ledger& store, const RgbImage& trigger_img,
                                             const RgbImage& owner_fp_img);

}  // namespace tracemark::ledger
