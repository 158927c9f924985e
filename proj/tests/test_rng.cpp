#include <gtest/gtest.h>

#include <set>

#include "bagsim/rng.hpp"

using bagsim::Philox4x32;

// Known-answer vectors for Philox4x32-10 from the Random123 distribution
// (kat_vectors). Each 64-bit output packs two 32-bit words, first word high.
TEST(Philox, ZeroCounterZeroKey) {
  Philox4x32 rng(0, 0);
  EXPECT_EQ(rng(), 0x6627e8d5e169c58dull);
  EXPECT_EQ(rng(), 0xbc57ac4c9b00dbd8ull);
}

TEST(Philox, AllOnes) {
  Philox4x32 rng(~0ull, ~0ull);
  rng.seek(~0ull);
  EXPECT_EQ(rng(), 0x408f276d41c83b0eull);
  EXPECT_EQ(rng(), 0xa20bc7c66d5451fdull);
}

TEST(Philox, PiDigits) {
  Philox4x32 rng(0x299f31d0a4093822ull, 0x0370734413198a2eull);
  rng.seek(0x85a308d3243f6a88ull);
  EXPECT_EQ(rng(), 0xd16cfe0994fdccebull);
  EXPECT_EQ(rng(), 0x5001e42024126ea1ull);
}

TEST(Philox, StreamsAreReproducibleAndDistinct) {
  Philox4x32 a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    seen.insert(x);
    seen.insert(c());
    seen.insert(d());
  }
  EXPECT_EQ(seen.size(), 300u);
}

TEST(Philox, UniformRangeAndMean) {
  Philox4x32 rng(42, 0);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  // stderr of the mean is sqrt(1/12/n) ~ 0.00065
  EXPECT_NEAR(sum / n, 0.5, 0.004);
}

TEST(Philox, BernoulliEdges) {
  Philox4x32 rng(1, 0);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_TRUE(rng.bernoulli(1.0));
    EXPECT_FALSE(rng.bernoulli(0.0));
  }
}
