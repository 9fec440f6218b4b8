#include <gtest/gtest.h>

#include "oracle/oracles.hpp"
#include "test_util.hpp"
#include "tracemark/phash.hpp"

using namespace tracemark;
using phash::PerceptualHash;

TEST(Preprocess, ConstantImageStaysConstant) {
  const GrayImage g = phash::preprocess(testutil::solid(64, 64, 200, 200, 200));
  ASSERT_EQ(g.width, 32);
  ASSERT_EQ(g.height, 32);
  for (double v : g.data) EXPECT_DOUBLE_EQ(v, 200.0);
}

TEST(Preprocess, IdentitySizeKeepsPixels) {
  const GrayImage g = phash::preprocess(testutil::solid(32, 32, 37, 37, 37));
  for (double v : g.data) EXPECT_NEAR(v, 37.0, 1e-12);
}

TEST(Preprocess, CheckerboardMatchesBilinearOracle) {
  RgbImage board(2, 2);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) {
      const std::uint8_t v = (x + y) % 2 ? 255 : 0;
      for (int c = 0; c < 3; ++c) board.pixel(x, y)[c] = v;
    }
  }
  const RealRgbImage r = resize_bilinear(board, 32, 32);
  const std::vector<double> expect = oracle::bilinear(board, 32, 32);
  ASSERT_EQ(r.data.size(), expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(r.data[i], expect[i], 1e-9) << i;
  // Corners sit in the clamped region and keep the source values.
  EXPECT_NEAR(r.data[0], 0.0, 1e-12);
  EXPECT_NEAR(r.data[(31 * 32 + 0) * 3], 255.0, 1e-12);
}

TEST(Preprocess, RandomResizeMatchesOracle) {
  for (int t = 0; t < 20; ++t) {
    const RgbImage img = testutil::random_image(5 + t * 3, 7 + t * 2, 100 + t);
    const std::vector<double> expect = oracle::luma(oracle::bilinear(img, 32, 32));
    const GrayImage g = phash::preprocess(img);
    for (std::size_t i = 0; i < expect.size(); ++i) ASSERT_NEAR(g.data[i], expect[i], 1e-9);
  }
}

TEST(Preprocess, ZeroDimensionRejected) {
  EXPECT_ERROR_CODE(phash::preprocess(RgbImage(0, 5)), ErrorCode::kInvalidInput);
}

TEST(DctPhash, UniformGrayOnlyDcBit) {
  const PerceptualHash h = phash::dct_phash(GrayImage(32, 32, 128.0));
  EXPECT_EQ(h.bits(), 0x8000000000000000ULL);
  const std::vector<double> g(32 * 32, 128.0);
  EXPECT_NEAR(oracle::dct2(g, 32, 0, 0), 4096.0, 1e-9);
  for (int u = 0; u < 8; ++u) {
    for (int v = 0; v < 8; ++v) {
      if (u || v) EXPECT_NEAR(oracle::dct2(g, 32, u, v), 0.0, 1e-9);
    }
  }
}

TEST(DctPhash, AllZeroImage) { EXPECT_EQ(phash::dct_phash(GrayImage(32, 32, 0.0)).bits(), 0U); }

TEST(DctPhash, WrongSizeRejected) {
  EXPECT_ERROR_CODE(phash::dct_phash(GrayImage(31, 32)), ErrorCode::kInvalidInput);
}

TEST(DctPhash, MatchesStepByStepOracleOnRandomGray) {
  SplitMix64 rng(7);
  for (int t = 0; t < 50; ++t) {
    GrayImage g(32, 32);
    for (double& v : g.data) v = rng.uniform(0.0, 255.0);
    EXPECT_EQ(phash::dct_phash(g).bits(), oracle::phash_gray32(g.data));
  }
}

TEST(DctPhash, OracleEquivalenceThousandImages) {
  SplitMix64 sizes(99);
  for (int t = 0; t < 1000; ++t) {
    const int w = 8 + static_cast<int>(sizes.below(90));
    const int h = 8 + static_cast<int>(sizes.below(90));
    const RgbImage img = testutil::random_image(w, h, mix_seed(2024, t));
    ASSERT_EQ(phash::hash_image(img).bits(), oracle::phash(img)) << "image " << t << " " << w << "x" << h;
  }
}

TEST(DctPhash, ScaleInvariance) {
  SplitMix64 rng(11);
  for (int t = 0; t < 100; ++t) {
    GrayImage g(32, 32);
    for (double& v : g.data) v = rng.uniform(0.0, 255.0);
    const auto base = phash::dct_phash(g);
    for (double alpha : {0.5, 2.0}) {
      GrayImage s = g;
      for (double& v : s.data) v *= alpha;
      EXPECT_EQ(phash::dct_phash(s), base) << "alpha " << alpha;
    }
  }
}

TEST(Hamming, PopcountOracle) {
  EXPECT_EQ(phash::hamming(PerceptualHash(0x00FF00FF00FF00FFULL), PerceptualHash(0x0F0F0F0F0F0F0F0FULL)), 32);
  EXPECT_EQ(phash::hamming(PerceptualHash(0), PerceptualHash(~0ULL)), 64);
  EXPECT_EQ(phash::hamming(PerceptualHash(0x123456789abcdef0ULL), PerceptualHash(0x0fedcba987654321ULL)), 36);
  SplitMix64 rng(3);
  for (int t = 0; t < 1000; ++t) {
    const std::uint64_t a = rng.next(), b = rng.next();
    ASSERT_EQ(phash::hamming(PerceptualHash(a), PerceptualHash(b)), oracle::popcount(a ^ b));
  }
}

TEST(Hamming, MetricAxioms) {
  SplitMix64 rng(5);
  for (int t = 0; t < 500; ++t) {
    const PerceptualHash a(rng.next()), b(rng.next()), c(rng.next());
    EXPECT_EQ(phash::hamming(a, a), 0);
    EXPECT_EQ(phash::hamming(a, b), phash::hamming(b, a));
    EXPECT_LE(phash::hamming(a, c), phash::hamming(a, b) + phash::hamming(b, c));
    EXPECT_EQ(phash::hamming(a, PerceptualHash(~a.bits())), 64);
  }
}

TEST(HashXor, Involution) {
  const PerceptualHash a(0xDEADBEEF00112233ULL), b(0x0123456789ABCDEFULL);
  EXPECT_EQ(phash::hash_xor(phash::hash_xor(a, b), b), a);
  EXPECT_EQ(phash::hash_xor(a, PerceptualHash(0)), a);
  EXPECT_EQ(phash::hash_xor(a, a).bits(), 0U);
}

TEST(Hex, RoundTripAndErrors) {
  EXPECT_EQ(PerceptualHash(0x8000000000000000ULL).to_hex(), "8000000000000000");
  EXPECT_EQ(PerceptualHash(0x00000000000000abULL).to_hex(), "00000000000000ab");
  SplitMix64 rng(8);
  for (int t = 0; t < 200; ++t) {
    const PerceptualHash h(rng.next());
    EXPECT_EQ(PerceptualHash::from_hex(h.to_hex()), h);
  }
  EXPECT_EQ(PerceptualHash::from_hex("DEADBEEF00000000").bits(), 0xDEADBEEF00000000ULL);
  EXPECT_ERROR_CODE(PerceptualHash::from_hex("abc"), ErrorCode::kInvalidInput);
  EXPECT_ERROR_CODE(PerceptualHash::from_hex("zzzzzzzzzzzzzzzz"), ErrorCode::kInvalidInput);
}

TEST(Bits, LayoutIsRowMajorFromMsb) {
  const PerceptualHash h(0x8000000000000001ULL);
  EXPECT_TRUE(h.bit(0, 0));
  EXPECT_TRUE(h.bit(7, 7));
  EXPECT_FALSE(h.bit(0, 1));
}

TEST(HashImage, DeterministicAndSensitive) {
  const RgbImage a = testutil::random_image(40, 30, 1);
  EXPECT_EQ(phash::hash_image(a), phash::hash_image(a));
  RgbImage grad(64, 64);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      for (int c = 0; c < 3; ++c) grad.pixel(x, y)[c] = static_cast<std::uint8_t>(x * 4);
    }
  }
  RgbImage flipped = grad;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      for (int c = 0; c < 3; ++c) flipped.pixel(x, y)[c] = grad.pixel(63 - x, y)[c];
    }
  }
  EXPECT_GT(phash::hamming(phash::hash_image(grad), phash::hash_image(flipped)), 0);
}
