#pragma once

// Collision avoidance detour: joint mode sampling with rejection on
// center-distance collisions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cadsim/error.hpp"
#include "cadsim/geometry.hpp"
#include "cadsim/predictors.hpp"
#include "cadsim/rng.hpp"

namespace cadsim {

struct CadConfig {
  std::size_t max_trials = 10;
  double collision_threshold = 0.1;  // meters, center distance
  std::uint64_t seed = 0;            // used only by the seed-taking overload of cad_resample
  DistanceMode distance_mode = DistanceMode::k3d;
  bool spatial_hash = false;

  void validate() const {
    if (max_trials < 1) throw ValidationError("cad.max_trials must be >= 1");
    if (!(collision_threshold > 0.0) || !std::isfinite(collision_threshold)) {
      throw ValidationError("cad.collision_threshold must be finite and > 0");
    }
  }

  friend bool operator==(const CadConfig&, const CadConfig&) = default;
};

/// First colliding pair in (step, q, r) order with q < r by agent id; step is 0-based.
struct CollisionWitness {
  std::size_t step = 0;
  AgentId q = 0;
  AgentId r = 0;

  friend bool operator==(const CollisionWitness&, const CollisionWitness&) = default;
};

struct CollisionReport {
  bool collision = false;
  std::optional<CollisionWitness> witness;

  explicit operator bool() const { return collision; }
};

/// Non-owning view of one agent's trajectory. Spans passed to the detectors
/// must be sorted by ascending id.
struct TrackRef {
  AgentId id = 0;
  const CandidateTrajectory* trajectory = nullptr;
};

/// Above this many agents, the spatial hash (when enabled) replaces the pair scan.
inline constexpr std::size_t kSpatialHashMinAgents = 64;

namespace detail {

inline std::size_t common_length(std::span<const TrackRef> tracks) {
  if (tracks.empty()) return 0;
  const std::size_t t = tracks.front().trajectory->size();
  for (const TrackRef& tr : tracks) {
    if (tr.trajectory->size() != t) {
      throw ValidationError("trajectory of agent " + std::to_string(tr.id) + " has " +
                            std::to_string(tr.trajectory->size()) + " steps, expected " +
                            std::to_string(t));
    }
  }
  return t;
}

inline void check_threshold(double threshold) {
  if (!(threshold >= 0.0) || !std::isfinite(threshold)) {
    throw ValidationError("collision threshold must be finite and >= 0");
  }
}

inline std::optional<CollisionWitness> scan_step(std::span<const TrackRef> tracks,
                                                 std::size_t t, double threshold,
                                                 DistanceMode mode) {
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const Vec3& a = (*tracks[i].trajectory)[t];
    for (std::size_t j = i + 1; j < tracks.size(); ++j) {
      if (center_distance(a, (*tracks[j].trajectory)[t], mode) < threshold) {
        return CollisionWitness{t, tracks[i].id, tracks[j].id};
      }
    }
  }
  return std::nullopt;
}

struct CellKey {
  std::int64_t x, y, z;
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(k.x));
    h = mix64(h ^ static_cast<std::uint64_t>(k.y));
    h = mix64(h ^ static_cast<std::uint64_t>(k.z));
    return static_cast<std::size_t>(h);
  }
};

inline std::optional<CollisionWitness> grid_step(std::span<const TrackRef> tracks, std::size_t t,
                                                 double threshold, DistanceMode mode) {
  // Slightly oversized cells so rounding in the division can never push a
  // colliding pair two cells apart.
  const double cell = threshold * (1.0 + 1e-9);
  constexpr double kMaxCell = 4.0e18;
  const bool use_z = mode == DistanceMode::k3d;

  std::vector<CellKey> keys(tracks.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const Vec3& p = (*tracks[i].trajectory)[t];
    const double cx = std::floor(p.x / cell);
    const double cy = std::floor(p.y / cell);
    const double cz = use_z ? std::floor(p.z / cell) : 0.0;
    if (std::abs(cx) > kMaxCell || std::abs(cy) > kMaxCell || std::abs(cz) > kMaxCell) {
      return scan_step(tracks, t, threshold, mode);
    }
    keys[i] = {static_cast<std::int64_t>(cx), static_cast<std::int64_t>(cy),
               static_cast<std::int64_t>(cz)};
  }

  std::unordered_map<CellKey, std::vector<std::size_t>, CellKeyHash> cells;
  cells.reserve(tracks.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) cells[keys[i]].push_back(i);

  const std::int64_t dz_max = use_z ? 1 : 0;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const Vec3& a = (*tracks[i].trajectory)[t];
    std::optional<std::size_t> best;
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -dz_max; dz <= dz_max; ++dz) {
          const auto it = cells.find({keys[i].x + dx, keys[i].y + dy, keys[i].z + dz});
          if (it == cells.end()) continue;
          for (std::size_t j : it->second) {
            if (j <= i || (best && j >= *best)) continue;
            if (center_distance(a, (*tracks[j].trajectory)[t], mode) < threshold) best = j;
          }
        }
      }
    }
    // Rows are visited in ascending i, so the first hit row holds the minimum pair.
    if (best) return CollisionWitness{t, tracks[i].id, tracks[*best].id};
  }
  return std::nullopt;
}

}  // namespace detail

/// O(N^2 T) scan over unordered pairs.
inline CollisionReport detect_collision_scan(std::span<const TrackRef> tracks, double threshold,
                                             DistanceMode mode = DistanceMode::k3d) {
  detail::check_threshold(threshold);
  const std::size_t horizon = detail::common_length(tracks);
  for (std::size_t t = 0; t < horizon; ++t) {
    if (auto w = detail::scan_step(tracks, t, threshold, mode)) return {true, w};
  }
  return {};
}

/// Uniform-grid broad phase; same result and witness as detect_collision_scan.
inline CollisionReport detect_collision_grid(std::span<const TrackRef> tracks, double threshold,
                                             DistanceMode mode = DistanceMode::k3d) {
  detail::check_threshold(threshold);
  const std::size_t horizon = detail::common_length(tracks);
  if (threshold == 0.0) return {};
  for (std::size_t t = 0; t < horizon; ++t) {
    if (auto w = detail::grid_step(tracks, t, threshold, mode)) return {true, w};
  }
  return {};
}

inline CollisionReport detect_collision(std::span<const TrackRef> tracks, double threshold,
                                        DistanceMode mode = DistanceMode::k3d,
                                        bool spatial_hash = false) {
  if (spatial_hash && tracks.size() > kSpatialHashMinAgents) {
    return detect_collision_grid(tracks, threshold, mode);
  }
  return detect_collision_scan(tracks, threshold, mode);
}

inline std::vector<TrackRef> make_track_refs(const std::map<AgentId, CandidateTrajectory>& trajs) {
  std::vector<TrackRef> refs;
  refs.reserve(trajs.size());
  for (const auto& [id, traj] : trajs) refs.push_back({id, &traj});
  return refs;
}

inline CollisionReport detect_collision(const std::map<AgentId, CandidateTrajectory>& trajs,
                                        double threshold, DistanceMode mode = DistanceMode::k3d,
                                        bool spatial_hash = false) {
  const auto refs = make_track_refs(trajs);
  return detect_collision(refs, threshold, mode, spatial_hash);
}

/// Inverse-CDF draw using one uniform. Zero-probability modes are never chosen.
inline std::size_t sample_categorical(std::span<const double> probs, RandomStream& rng) {
  double total = 0.0;
  for (double p : probs) total += p;
  const double u = rng.uniform() * total;
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cum += probs[i];
    last_positive = i;
    if (u < cum) return i;
  }
  return last_positive;
}

struct CadResult {
  std::map<AgentId, std::size_t> selected_mode;
  std::map<AgentId, CandidateTrajectory> trajectories;
  std::size_t trials_used = 0;
  bool collision_free = false;

  friend bool operator==(const CadResult&, const CadResult&) = default;
};

/**
 * Rejection resampling over the joint mode space.
 *
 * Each trial draws every agent's mode independently from its categorical
 * distribution, in ascending id order, one uniform per agent. The first
 * collision-free trial is returned; otherwise the sample of trial
 * max_trials is returned as is, with collision_free = false.
 */
inline CadResult cad_resample(const DistributionMap& dists, const CadConfig& config,
                              RandomStream& rng) {
  config.validate();
  if (dists.empty()) throw ValidationError("cad_resample needs at least one agent");
  for (const auto& [id, d] : dists) d.validate(id, kFileProbSumTolerance);
  const std::size_t horizon = dists.begin()->second.horizon();
  for (const auto& [id, d] : dists) {
    if (d.horizon() != horizon) {
      throw ValidationError("agent " + std::to_string(id) + ": horizon " +
                            std::to_string(d.horizon()) + " differs from " +
                            std::to_string(horizon));
    }
  }

  std::vector<TrackRef> refs;
  refs.reserve(dists.size());
  std::vector<std::size_t> modes(dists.size());

  std::size_t trial = 1;
  bool collision = true;
  for (;; ++trial) {
    refs.clear();
    std::size_t i = 0;
    for (const auto& [id, d] : dists) {
      modes[i] = sample_categorical(d.probs, rng);
      refs.push_back({id, &d.modes[modes[i]]});
      ++i;
    }
    collision = detect_collision(refs, config.collision_threshold, config.distance_mode,
                                 config.spatial_hash)
                    .collision;
    if (!collision || trial == config.max_trials) break;
  }

  CadResult result;
  result.trials_used = trial;
  result.collision_free = !collision;
  std::size_t i = 0;
  for (const auto& [id, d] : dists) {
    result.selected_mode.emplace(id, modes[i]);
    result.trajectories.emplace(id, d.modes[modes[i]]);
    ++i;
  }
  return result;
}

/// Same as above with a stream seeded from config.seed.
inline CadResult cad_resample(const DistributionMap& dists, const CadConfig& config) {
  RandomStream rng = RandomStream::from_seed(config.seed);
  return cad_resample(dists, config, rng);
}

}  // namespace cadsim
