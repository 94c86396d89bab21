#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cadsim/kinematics.hpp"
#include "cadsim/rng.hpp"

using namespace cadsim;

namespace {

constexpr double kPi = std::numbers::pi;

double angle_diff(double a, double b) { return std::abs(std::remainder(a - b, 2.0 * kPi)); }

Vec3 rotate(const Vec3& p, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

}  // namespace

TEST(EstimateHeadings, StraightPlusX) {
  const std::vector<Vec3> p = {{1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  for (double h : estimate_headings(p, {0, 0, 0}, 0.4)) EXPECT_EQ(h, 0.0);
}

TEST(EstimateHeadings, FortyFiveDegrees) {
  const std::vector<Vec3> p = {{1, 1, 0}, {2, 2, 0}, {3, 3, 0}};
  for (double h : estimate_headings(p, {0, 0, 0}, 0.0)) EXPECT_NEAR(h, kPi / 4, 1e-12);
}

TEST(EstimateHeadings, StationaryCarriesInitialHeading) {
  const std::vector<Vec3> p(10, Vec3{5, 5, 0});
  for (double h : estimate_headings(p, {5, 5, 0}, 0.7)) EXPECT_EQ(h, 0.7);
}

TEST(EstimateHeadings, CarryForwardAfterMotion) {
  const std::vector<Vec3> p = {{0, 1, 0}, {0, 1, 0}, {0, 1 + 5e-7, 0}, {-1, 1 + 5e-7, 0}};
  const auto h = estimate_headings(p, {0, 0, 0}, 0.0);
  EXPECT_NEAR(h[0], kPi / 2, 1e-15);
  EXPECT_EQ(h[1], h[0]);
  EXPECT_EQ(h[2], h[0]);  // below 1e-6 m
  EXPECT_NEAR(h[3], kPi, 1e-15);
}

TEST(EstimateHeadings, ReversingGetsPiNotMinusPi) {
  // atan2(-0.0, -1) is -pi; the output range is (-pi, pi].
  const std::vector<Vec3> p = {{-1, -0.0, 0}, {-2, -0.0, 0}};
  const auto h = estimate_headings(p, {0, 0, 0}, 0.0);
  EXPECT_EQ(h[0], kPi);
  EXPECT_EQ(h[1], kPi);
}

TEST(EstimateHeadings, IgnoresZ) {
  const std::vector<Vec3> p = {{0, 0, 3}, {1, 0, -2}};
  const auto h = estimate_headings(p, {0, 0, 0}, 1.0);
  EXPECT_EQ(h[0], 1.0);
  EXPECT_EQ(h[1], 0.0);
}

TEST(EstimateHeadings, InitialHeadingIsWrapped) {
  const std::vector<Vec3> p(2, Vec3{0, 0, 0});
  for (double h : estimate_headings(p, {0, 0, 0}, 3 * kPi)) EXPECT_NEAR(h, kPi, 1e-12);
  EXPECT_EQ(estimate_headings(p, {0, 0, 0}, -kPi).front(), kPi);
}

TEST(EstimateHeadings, NonFiniteRejected) {
  const std::vector<Vec3> p = {{NAN, 0, 0}};
  EXPECT_THROW(estimate_headings(p, {0, 0, 0}, 0.0), ValidationError);
  EXPECT_THROW(estimate_headings({}, {0, 0, 0}, INFINITY), ValidationError);
  EXPECT_TRUE(estimate_headings({}, {0, 0, 0}, 0.0).empty());
}

TEST(HeadingProperty, RotationEquivariance) {
  RandomStream rng = RandomStream::from_seed(606);
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t n = 1 + rng() % 30;
    std::vector<Vec3> p;
    Vec3 cur{10 * rng.uniform(), 10 * rng.uniform(), 0};
    const Vec3 start = cur;
    for (std::size_t i = 0; i < n; ++i) {
      // occasional zero steps exercise the carry-forward path
      if (rng() % 5 != 0) {
        const double len = 0.1 + 1.4 * rng.uniform();
        const double dir = 2 * kPi * rng.uniform();
        cur = cur + Vec3{len * std::cos(dir), len * std::sin(dir), rng.uniform()};
      }
      p.push_back(cur);
    }
    const double h0 = kPi * (1 - 2 * rng.uniform());
    const double theta = 2 * kPi * rng.uniform();
    std::vector<Vec3> rp;
    for (const Vec3& v : p) rp.push_back(rotate(v, theta));
    const auto h = estimate_headings(p, start, h0);
    const auto hr = estimate_headings(rp, rotate(start, theta), h0 + theta);
    ASSERT_EQ(h.size(), hr.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
      ASSERT_LE(angle_diff(hr[i], h[i] + theta), 1e-12) << iter << " " << i;
      ASSERT_GT(h[i], -kPi);
      ASSERT_LE(h[i], kPi);
      ASSERT_GT(hr[i], -kPi);
      ASSERT_LE(hr[i], kPi);
    }
  }
}

TEST(HeadingProperty, UnitVectorParallelToDisplacement) {
  RandomStream rng = RandomStream::from_seed(707);
  for (int iter = 0; iter < 1000; ++iter) {
    std::vector<Vec3> p;
    Vec3 cur{0, 0, 0};
    for (int i = 0; i < 10; ++i) {
      cur = cur + Vec3{20 * rng.uniform() - 10, 20 * rng.uniform() - 10, 0};
      p.push_back(cur);
    }
    const auto h = estimate_headings(p, {0, 0, 0}, 0.0);
    Vec3 prev{0, 0, 0};
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double dx = p[i].x - prev.x;
      const double dy = p[i].y - prev.y;
      const double len = std::hypot(dx, dy);
      ASSERT_GE((std::cos(h[i]) * dx + std::sin(h[i]) * dy) / len, 1.0 - 1e-12);
      prev = p[i];
    }
  }
}
