#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "test_util.hpp"
#include "tracemark/digest.hpp"
#include "tracemark/ledger.hpp"
#include "tracemark/synth.hpp"

using namespace tracemark;
using namespace std::chrono_literals;

namespace {

// Deterministic clock advancing one second per call.
ledger::Clock stepping_clock(std::int64_t start = 1'700'000'000) {
  auto t = std::make_shared<std::int64_t>(start);
  return [t] { return std::chrono::system_clock::time_point(std::chrono::seconds((*t)++)); };
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void dump(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string l;
  while (std::getline(in, l)) out.push_back(l);
  return out;
}

}  // namespace

TEST(Digest, Sha256KnownVectors) {
  EXPECT_EQ(digest::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(digest::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Digest, Base64Vectors) {
  const std::string s = "foobar";
  const std::vector<std::uint8_t> b(s.begin(), s.end());
  EXPECT_EQ(digest::base64_encode(b), "Zm9vYmFy");
  EXPECT_EQ(digest::base64_encode(std::span(b).first(4)), "Zm9vYg==");
  EXPECT_EQ(digest::base64_encode(std::span(b).first(5)), "Zm9vYmE=");
  EXPECT_EQ(digest::base64_decode("Zm9vYg=="), std::vector<std::uint8_t>(b.begin(), b.begin() + 4));
  EXPECT_ERROR_CODE(digest::base64_decode("Zm9v!"), ErrorCode::kInvalidInput);
}

TEST(Record, CanonicalLineRoundTrip) {
  ledger::LedgerRecord r{1, "2024-01-02T03:04:05Z", "alice", "8000000000000000", std::string(ledger::kGenesisDigest),
                         "trig \"quoted\""};
  const std::string line = r.canonical_line();
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_EQ(line.rfind("{\"seq\":1,\"timestamp\":\"2024-01-02T03:04:05Z\",\"owner_id\":\"alice\"", 0), 0U);
  EXPECT_EQ(ledger::LedgerRecord::parse(line), r);
  EXPECT_ERROR_CODE(ledger::LedgerRecord::parse("{\"seq\":1}"), ErrorCode::kFormat);
}

TEST(Ledger, AppendLinksRecords) {
  testutil::TempDir dir;
  auto l = ledger::Ledger::open(dir / "l.ndjson", stepping_clock());
  const auto r1 = l.append("alice", phash::PerceptualHash(1), "a");
  const auto r2 = l.append("alice", phash::PerceptualHash(2), "b");
  EXPECT_EQ(r1.seq, 1U);
  EXPECT_EQ(r1.prev_digest, ledger::kGenesisDigest);
  EXPECT_EQ(r2.prev_digest, digest::sha256_hex(r1.canonical_line()));
  const auto lines = lines_of(slurp(dir / "l.ndjson"));
  ASSERT_EQ(lines.size(), 2U);
  EXPECT_EQ(lines[0], r1.canonical_line());
  EXPECT_EQ(r1.timestamp, "2023-11-14T22:13:20Z");
  EXPECT_TRUE(ledger::verify_chain(dir / "l.ndjson").ok);
  EXPECT_EQ(ledger::Ledger::open(dir / "l.ndjson").records().size(), 2U);
}

TEST(Ledger, MissingStoreIsEmptyValidChain) {
  testutil::TempDir dir;
  const auto s = ledger::verify_chain(dir / "none.ndjson");
  EXPECT_TRUE(s.ok);
  EXPECT_EQ(s.records, 0U);
}

TEST(Ledger, FlippedByteInMiddleRecord) {
  testutil::TempDir dir;
  const auto path = dir / "l.ndjson";
  {
    auto l = ledger::Ledger::open(path, stepping_clock());
    for (int i = 0; i < 5; ++i) l.append("alice", phash::PerceptualHash(i), "n");
  }
  auto lines = lines_of(slurp(path));
  lines[2][lines[2].find("alice")] = 'A';
  std::string joined;
  for (const auto& l : lines) joined += l + "\n";
  dump(path, joined);
  const auto s = ledger::verify_chain(path);
  EXPECT_FALSE(s.ok);
  EXPECT_EQ(*s.first_bad_seq, 4U);
  EXPECT_ERROR_CODE(ledger::Ledger::open(path), ErrorCode::kCorruption);
}

TEST(Ledger, TamperAnywhereDetected) {
  testutil::TempDir dir;
  const auto path = dir / "l.ndjson";
  {
    auto l = ledger::Ledger::open(path, stepping_clock());
    for (int i = 0; i < 20; ++i) l.append(i % 2 ? "bob" : "alice", phash::PerceptualHash(i * 977), "rec");
  }
  const std::string clean = slurp(path);
  for (std::size_t pos = 0; pos < clean.size(); ++pos) {
    std::string t = clean;
    t[pos] = static_cast<char>(t[pos] ^ 0x01);
    dump(path, t);
    ASSERT_FALSE(ledger::verify_chain(path).ok) << "byte " << pos;
  }
  dump(path, clean);
  EXPECT_TRUE(ledger::verify_chain(path).ok);
}

TEST(Ledger, TruncationAndHeadTamperDetected) {
  testutil::TempDir dir;
  const auto path = dir / "l.ndjson";
  {
    auto l = ledger::Ledger::open(path, stepping_clock());
    for (int i = 0; i < 4; ++i) l.append("alice", phash::PerceptualHash(i), "n");
  }
  const std::string clean = slurp(path);
  auto lines = lines_of(clean);
  dump(path, lines[0] + "\n" + lines[1] + "\n" + lines[2] + "\n");
  auto s = ledger::verify_chain(path);
  EXPECT_FALSE(s.ok);
  EXPECT_EQ(*s.first_bad_seq, 4U);

  dump(path, clean);
  std::filesystem::path head = path;
  head += ".head";
  std::filesystem::remove(head);
  EXPECT_FALSE(ledger::verify_chain(path).ok);
}

TEST(Ledger, EarliestClaimWins) {
  testutil::TempDir dir;
  auto l = ledger::Ledger::open(dir / "l.ndjson", stepping_clock());
  const phash::PerceptualHash p(0xABCDEF);
  l.append("alice", phash::PerceptualHash(1), "other");
  l.append("alice", p, "original");
  l.append("eve", p, "copy");
  const auto r = l.find_earliest(p);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->owner_id, "alice");
  EXPECT_EQ(r->seq, 2U);
  EXPECT_FALSE(l.find_earliest(phash::PerceptualHash(77)));
}

TEST(Ledger, ClockSkewRejected) {
  testutil::TempDir dir;
  auto t = std::make_shared<std::int64_t>(2'000'000'000);
  auto l = ledger::Ledger::open(dir / "l.ndjson",
                                [t] { return std::chrono::system_clock::time_point(std::chrono::seconds(*t)); });
  l.append("alice", phash::PerceptualHash(1), "");
  l.append("alice", phash::PerceptualHash(2), "");  // same second is fine
  *t -= 10;
  EXPECT_ERROR_CODE(l.append("alice", phash::PerceptualHash(3), ""), ErrorCode::kClockSkew);
  EXPECT_EQ(l.records().size(), 2U);
}

TEST(Ledger, ConcurrentWritersKeepChain) {
  testutil::TempDir dir;
  const auto path = dir / "l.ndjson";
  auto worker = [&](std::string owner) {
    auto l = ledger::Ledger::open(path);
    for (int i = 0; i < 15; ++i) l.append(owner, phash::PerceptualHash(i), "");
  };
  std::thread a(worker, "alice"), b(worker, "bob");
  a.join();
  b.join();
  const auto s = ledger::verify_chain(path);
  EXPECT_TRUE(s.ok) << s.reason;
  EXPECT_EQ(s.records, 30U);
}

TEST(Ownership, BindIsXorOfHashes) {
  const RgbImage trig = synth::video(synth::Scene::kFlashcardRing, 1, 1).frames[0];
  const RgbImage fp = synth::fingerprint_image(7);
  const auto p = ledger::fingerprint_bind(trig, fp);
  EXPECT_EQ(p, phash::hash_image(trig) ^ phash::hash_image(fp));

  testutil::TempDir dir;
  auto l = ledger::Ledger::open(dir / "l.ndjson", stepping_clock());
  l.append("alice", p, "trigger 0");
  const auto hit = ledger::verify_ownership(l, trig, fp);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->owner_id, "alice");
  EXPECT_FALSE(ledger::verify_ownership(l, trig, synth::fingerprint_image(8)));
}
