#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "cadsim/rng.hpp"

using cadsim::RandomStream;

TEST(RandomStream, SameKeySameSequence) {
  RandomStream a = RandomStream::from_seed(42);
  RandomStream b = RandomStream::from_seed(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(RandomStream, DeriveDoesNotAdvanceParent) {
  RandomStream a = RandomStream::from_seed(7);
  const RandomStream before = a;
  (void)a.derive(3);
  EXPECT_EQ(a, before);
}

TEST(RandomStream, DerivedStreamsDiffer) {
  const RandomStream root = RandomStream::from_seed(1);
  std::set<std::uint64_t> first_outputs;
  for (std::uint64_t label = 0; label < 256; ++label) {
    RandomStream child = root.derive(label);
    first_outputs.insert(child());
  }
  EXPECT_EQ(first_outputs.size(), 256u);
  // Neighbouring seeds must not produce shifted copies of each other.
  RandomStream s0 = RandomStream::from_seed(0);
  RandomStream s1 = RandomStream::from_seed(1);
  std::vector<std::uint64_t> v0, v1;
  for (int i = 0; i < 64; ++i) {
    v0.push_back(s0());
    v1.push_back(s1());
  }
  for (std::uint64_t x : v1) EXPECT_EQ(std::count(v0.begin(), v0.end(), x), 0);
}

TEST(RandomStream, UniformRangeAndMoments) {
  RandomStream rng = RandomStream::from_seed(99);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  // std of the mean is sqrt(1/12/n) ~ 6.5e-4
  EXPECT_NEAR(sum / n, 0.5, 4e-3);
}

TEST(RandomStream, NormalMoments) {
  RandomStream rng = RandomStream::from_seed(5);
  const int n = 200000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    ASSERT_TRUE(std::isfinite(z));
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(sq / n - mean * mean, 1.0, 0.02);
}
