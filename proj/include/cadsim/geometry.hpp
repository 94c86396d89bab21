#pragma once

#include <cmath>
#include <numbers>

namespace cadsim {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
constexpr Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }

inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

/// Which coordinates enter a center-distance test.
enum class DistanceMode { k3d, kXy };

inline double center_distance(const Vec3& a, const Vec3& b, DistanceMode mode) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = mode == DistanceMode::k3d ? a.z - b.z : 0.0;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline double xy_distance(const Vec3& a, const Vec3& b) {
  return center_distance(a, b, DistanceMode::kXy);
}

/// Maps any finite angle into (-pi, pi]. Values already in range are returned unchanged.
inline double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  if (a > -pi && a <= pi) return a;
  double r = std::remainder(a, 2.0 * pi);  // [-pi, pi]
  if (r <= -pi) r += 2.0 * pi;
  return r;
}

}  // namespace cadsim
