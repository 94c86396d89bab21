#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "cadsim/error.hpp"
#include "cadsim/geometry.hpp"

namespace cadsim {

/// Steps whose xy displacement is shorter than this keep the previous heading.
inline constexpr double kHeadingMinDisplacement = 1e-6;

struct PoseTrajectory {
  std::vector<Vec3> positions;
  std::vector<double> headings;

  std::size_t size() const { return positions.size(); }

  friend bool operator==(const PoseTrajectory&, const PoseTrajectory&) = default;
};

/**
 * Velocity-direction headings for predicted positions.
 *
 * Step t uses atan2 of the xy displacement from step t-1; step 1 differences
 * against `last_observed`. Displacements below kHeadingMinDisplacement carry
 * the previous heading forward, starting from `initial_heading`. Output lies
 * in (-pi, pi].
 */
inline std::vector<double> estimate_headings(std::span<const Vec3> positions,
                                             const Vec3& last_observed, double initial_heading) {
  if (!std::isfinite(initial_heading) || !is_finite(last_observed)) {
    throw ValidationError("estimate_headings: non-finite initial state");
  }
  std::vector<double> headings;
  headings.reserve(positions.size());
  double prev_heading = wrap_angle(initial_heading);
  Vec3 prev = last_observed;
  for (const Vec3& p : positions) {
    if (!is_finite(p)) throw ValidationError("estimate_headings: non-finite position");
    const double dx = p.x - prev.x;
    const double dy = p.y - prev.y;
    if (std::hypot(dx, dy) >= kHeadingMinDisplacement) {
      // atan2 yields -pi for (-x, -0.0); fold it onto +pi.
      prev_heading = wrap_angle(std::atan2(dy, dx));
    }
    headings.push_back(prev_heading);
    prev = p;
  }
  return headings;
}

inline PoseTrajectory make_pose_trajectory(std::vector<Vec3> positions, const Vec3& last_observed,
                                           double initial_heading) {
  PoseTrajectory pose;
  pose.headings = estimate_headings(positions, last_observed, initial_heading);
  pose.positions = std::move(positions);
  return pose;
}

}  // namespace cadsim
