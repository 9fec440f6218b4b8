#include <gtest/gtest.h>

#include <set>

#include "test_util.hpp"
#include "tracemark/acpt.hpp"
#include "tracemark/media.hpp"
#include "tracemark/synth.hpp"

using namespace tracemark;

namespace {

// SHA-256 digests computed with Python hashlib.
constexpr const char* kHnUser1 = "a1a97da24475f5331b1ced5de4386f95f9899e2cb5185b6e8240e88ccf1f71f5";
constexpr const char* kHnUser2 = "050710a8207ce772219611042a48f78b1e2ae601dab1ee3ba7a18d73d3d80e7d";
constexpr const char* kHnAlice = "08088870a7aa1c14ef7b4a3af9ba07e0be591a3897b0cd3130b81979e68f983f";
constexpr const char* kHnBob = "9644b0c0ff20dd53974456363f631b23551aa8d57ec959aa7906a6542df1d2d7";

const acpt::SelectionKey kPrefix{0, 1, 2, 3, 4, 5, 6, 7};

std::uint64_t be_ascii(const std::string& s) {
  std::uint64_t v = 0;
  for (char c : s) v = (v << 8) | static_cast<unsigned char>(c);
  return v;
}

struct Detectors {
  nn::ModelSnapshot apple, rabbit;
  std::vector<RgbImage> apples, rabbits;
};

const Detectors& detectors() {
  static const Detectors d = [] {
    Detectors out;
    out.apples = synth::key_images(synth::KeyCategory::kApple, 80, 1);
    out.rabbits = synth::key_images(synth::KeyCategory::kRabbit, 80, 2);
    auto cars = synth::key_images(synth::KeyCategory::kCar, 40, 3);
    nn::TrainConfig cfg;
    cfg.epochs = 15;
    std::vector<RgbImage> not_apple(out.rabbits.begin(), out.rabbits.begin() + 40);
    not_apple.insert(not_apple.end(), cars.begin(), cars.end());
    std::vector<RgbImage> not_rabbit(out.apples.begin(), out.apples.begin() + 40);
    not_rabbit.insert(not_rabbit.end(), cars.begin(), cars.end());
    out.apple = acpt::train_detector(std::span(out.apples).first(40), not_apple, cfg);
    out.rabbit = acpt::train_detector(std::span(out.rabbits).first(40), not_rabbit, cfg);
    return out;
  }();
  return d;
}

acpt::AuthorizationCenter two_user_center() {
  const Detectors& d = detectors();
  acpt::AuthorizationCenter c;
  const auto alice = acpt::make_credential("alice", "HN", kPrefix);
  const auto bob = acpt::make_credential("bob", "HN", kPrefix);
  c.identities = acpt::enroll(c.identities, alice, d.apples[0], "alice");
  c.identities = acpt::enroll(c.identities, bob, d.rabbits[0], "bob");
  c.bundles.push_back({"alice", {d.apples[0]}, d.apple, alice});
  c.bundles.push_back({"bob", {d.rabbits[0]}, d.rabbit, bob});
  return c;
}

nn::ModelSnapshot constant_model(int cls) {
  nn::ModelSnapshot m = nn::build_model({1, 28, 28}, {nn::dense(10)}, 1);
  std::fill(m.layers[0].weights.begin(), m.layers[0].weights.end(), 0.0f);
  m.layers[0].bias[cls] = 5.0f;
  return m;
}

}  // namespace

TEST(Credential, Sha256OracleFixtures) {
  EXPECT_EQ(acpt::make_credential("user1", "HN", kPrefix).encrypted_username, std::string(kHnUser1).substr(0, 8));
  EXPECT_EQ(acpt::make_credential("user2", "HN", kPrefix).encrypted_username, std::string(kHnUser2).substr(0, 8));
  EXPECT_EQ(acpt::make_credential("alice", "HN", kPrefix).encrypted_username, std::string(kHnAlice).substr(0, 8));
  EXPECT_EQ(acpt::make_credential("bob", "HN", kPrefix).encrypted_username, std::string(kHnBob).substr(0, 8));
  EXPECT_NE(acpt::make_credential("user1", "HN", kPrefix).encrypted_username,
            acpt::make_credential("user2", "HN", kPrefix).encrypted_username);
}

TEST(Credential, SelectionKeyPicksPositions) {
  const acpt::SelectionKey k{63, 0, 10, 20, 30, 40, 50, 1};
  std::string expect;
  for (int i : k) expect += kHnUser1[i];
  const auto c = acpt::make_credential("user1", "HN", k);
  EXPECT_EQ(c.encrypted_username, expect);
  EXPECT_EQ(c.k1_string(), "63,0,10,20,30,40,50,1");
  EXPECT_EQ(acpt::parse_k1(c.k1_string()), k);
}

TEST(Credential, ParseK1Errors) {
  EXPECT_ERROR_CODE(acpt::parse_k1("0,1,2,3,4,5,6"), ErrorCode::kInvalidInput);
  EXPECT_ERROR_CODE(acpt::parse_k1("0,1,2,3,4,5,6,7,8"), ErrorCode::kInvalidInput);
  EXPECT_ERROR_CODE(acpt::parse_k1("0,1,2,3,4,5,6,6"), ErrorCode::kInvalidInput);
  EXPECT_ERROR_CODE(acpt::parse_k1("0,1,2,3,4,5,6,64"), ErrorCode::kInvalidInput);
  EXPECT_ERROR_CODE(acpt::parse_k1("0,1,2,3,4,5,6,x"), ErrorCode::kInvalidInput);
}

TEST(Credential, RandomK1IsValid) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto k = acpt::random_k1(s);
    EXPECT_EQ(std::set<int>(k.begin(), k.end()).size(), 8U);
    for (int i : k) EXPECT_TRUE(i >= 0 && i < 64);
  }
}

TEST(Validator, CredentialBitsAndVerificationValue) {
  EXPECT_EQ(acpt::credential_bits("abcdefgh"), 0x6162636465666768ULL);
  EXPECT_ERROR_CODE(acpt::credential_bits("abc"), ErrorCode::kInvalidInput);
  const std::string cred = std::string(kHnUser1).substr(0, 8);
  const RgbImage gray = testutil::solid(32, 32, 128, 128, 128);
  EXPECT_EQ(acpt::verification_value(cred, gray), be_ascii(cred) ^ 0x8000000000000000ULL);
}

TEST(Validator, EnrollValidateAndReject) {
  const auto apples = synth::key_images(synth::KeyCategory::kApple, 2, 5);
  const auto cred = acpt::make_credential("user1", "HN", kPrefix);
  const auto q = acpt::enroll({}, cred, apples[0], "user1");
  EXPECT_EQ(q.size(), 1U);
  EXPECT_EQ(acpt::validate(q, cred.encrypted_username, apples[0]), "user1");
  ASSERT_NE(phash::hash_image(apples[0]), phash::hash_image(apples[1]));
  EXPECT_FALSE(acpt::validate(q, cred.encrypted_username, apples[1]));
  EXPECT_FALSE(acpt::validate(q, "00000000", apples[0]));
  EXPECT_ERROR_CODE(acpt::validate(q, "1234567", apples[0]), ErrorCode::kInvalidInput);
  EXPECT_ERROR_CODE(acpt::enroll(q, cred, apples[0], "other"), ErrorCode::kCollision);
}

TEST(Validator, MonteCarloSoundness) {
  const RgbImage key = synth::key_images(synth::KeyCategory::kApple, 1, 9)[0];
  acpt::IdentityBase q = acpt::enroll({}, acpt::make_credential("user1", "HN", kPrefix), key, "user1");
  q = acpt::enroll(q, acpt::make_credential("user2", "HN", kPrefix), key, "user2");
  const std::uint64_t key_hash = phash::hash_image(key).bits();
  SplitMix64 rng(12345);
  const char* hex = "0123456789abcdef";
  int accepted = 0;
  for (int i = 0; i < 100000; ++i) {
    std::string cred(8, '0');
    for (char& c : cred) c = hex[rng.below(16)];
    if (q.lookup(acpt::credential_bits(cred) ^ key_hash)) ++accepted;
  }
  EXPECT_EQ(accepted, 0);
}

TEST(Validator, IdentityBasePersistence) {
  testutil::TempDir dir;
  acpt::IdentityBase q;
  q.insert(0x0123456789abcdefULL, "alice");
  q.insert(42, "bob");
  q.save(dir / "q.ndjson");
  const auto back = acpt::IdentityBase::load(dir / "q.ndjson");
  EXPECT_EQ(back.entries(), q.entries());
}

TEST(Detector, SeparatesCategories) {
  const Detectors& d = detectors();
  int ok = 0, total = 0;
  for (std::size_t i = 40; i < 80; ++i) {
    ok += acpt::detector_accepts(d.apple, d.apples[i]);
    ok += !acpt::detector_accepts(d.apple, d.rabbits[i]);
    ok += acpt::detector_accepts(d.rabbit, d.rabbits[i]);
    ok += !acpt::detector_accepts(d.rabbit, d.apples[i]);
    total += 4;
  }
  EXPECT_GE(static_cast<double>(ok) / total, 0.9);
  EXPECT_ERROR_CODE(acpt::train_detector({}, d.apples, {}), ErrorCode::kInvalidInput);
}

TEST(Authorization, AuthorizedUsesTrueModel) {
  const auto center = two_user_center();
  const auto model = constant_model(7);
  const RgbImage query = testutil::random_image(28, 28, 3);
  const auto& alice = center.bundles[0];
  EXPECT_EQ(acpt::authenticate(center, alice.credential.encrypted_username, alice.key_images[0]), "alice");
  for (std::uint64_t s = 0; s < 20; ++s) {
    EXPECT_EQ(acpt::authorize(center, model, alice.credential.encrypted_username, alice.key_images[0], query, s), 7);
  }
}

TEST(Authorization, UnauthorizedIsSeededRandom) {
  const auto center = two_user_center();
  const auto model = constant_model(7);
  const RgbImage query = testutil::random_image(28, 28, 3);
  const auto& alice = center.bundles[0];
  const auto& bob = center.bundles[1];
  // alice's credential with bob's key fails the validator
  EXPECT_FALSE(acpt::authenticate(center, alice.credential.encrypted_username, bob.key_images[0]));
  std::vector<int> counts(10, 0);
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const int c = acpt::authorize(center, model, "deadbeef", alice.key_images[0], query, s);
    EXPECT_EQ(c, acpt::random_class(s, 10));
    ++counts[c];
  }
  for (int c : counts) EXPECT_NEAR(c / 2000.0, 0.1, 0.03);
  EXPECT_EQ(acpt::request_seed(5, "r1"), acpt::request_seed(5, "r1"));
  EXPECT_NE(acpt::request_seed(5, "r1"), acpt::request_seed(5, "r2"));
}

TEST(Authorization, KeyImagesUnchanged) {
  const auto center = two_user_center();
  const auto& d = detectors();
  const auto model = constant_model(1);
  const RgbImage before = center.bundles[0].key_images[0];
  acpt::authorize(center, model, center.bundles[0].credential.encrypted_username, center.bundles[0].key_images[0],
                  testutil::random_image(28, 28, 1), 1);
  EXPECT_EQ(media::mse(before, center.bundles[0].key_images[0]), 0.0);
  EXPECT_EQ(media::mse(before, d.apples[0]), 0.0);
}

TEST(Trace, LeakerRule) {
  EXPECT_EQ(acpt::decide_leaker({{"alice", 0.10}, {"bob", 1.00}}), "bob");
  EXPECT_EQ(acpt::decide_leaker({{"alice", 0.8}, {"bob", 0.3}}), "alice");
  EXPECT_FALSE(acpt::decide_leaker({{"alice", 0.9}, {"bob", 0.31}}));
  EXPECT_FALSE(acpt::decide_leaker({{"alice", 0.79}, {"bob", 0.1}}));
  EXPECT_FALSE(acpt::decide_leaker({{"alice", 0.9}, {"bob", 0.9}}));
}

TEST(Trace, LeakedBundleNamesUser) {
  const auto full = two_user_center();
  acpt::ProtectedModel leaked;
  leaked.center.bundles = {full.bundles[1]};
  leaked.center.identities = acpt::enroll({}, full.bundles[1].credential, full.bundles[1].key_images[0], "bob");
  nn::LabeledDataset test;
  test.shape = {1, 28, 28};
  test.num_classes = 10;
  for (int i = 0; i < 200; ++i) test.add(std::vector<float>(28 * 28, 0.0f), 7);
  leaked.model = constant_model(7);
  std::vector<acpt::UserProbe> probes;
  for (const auto& b : full.bundles) probes.push_back({b.user_id, b.credential.encrypted_username, b.key_images[0]});
  const auto r = acpt::trace_acpt(leaked, probes, test, 3);
  EXPECT_EQ(r.per_user_accuracy.at("bob"), 1.0);
  EXPECT_LE(r.per_user_accuracy.at("alice"), 0.3);
  EXPECT_EQ(r.leaker, "bob");
  EXPECT_ERROR_CODE(acpt::trace_acpt(leaked, std::span(probes).first(1), test, 3), ErrorCode::kInvalidInput);
}

TEST(Center, SaveLoadRoundTrip) {
  testutil::TempDir dir;
  const auto c = two_user_center();
  c.save(dir.path());
  const auto back = acpt::AuthorizationCenter::load(dir.path());
  EXPECT_EQ(back.identities.entries(), c.identities.entries());
  ASSERT_EQ(back.bundles.size(), 2U);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.bundles[i].user_id, c.bundles[i].user_id);
    EXPECT_EQ(back.bundles[i].detector, c.bundles[i].detector);
    EXPECT_EQ(back.bundles[i].key_images, c.bundles[i].key_images);
    EXPECT_EQ(back.bundles[i].credential.encrypted_username, c.bundles[i].credential.encrypted_username);
    EXPECT_EQ(back.bundles[i].credential.k1, c.bundles[i].credential.k1);
  }
}
