#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "cadsim/error.hpp"
#include "cadsim/geometry.hpp"
#include "cadsim/json_io.hpp"
#include "cadsim/rng.hpp"
#include "cadsim/scenario.hpp"

namespace cadsim {

/// One candidate future: T center positions, step 1 first.
using CandidateTrajectory = std::vector<Vec3>;

/// Probabilities produced in memory must sum to one within this bound.
inline constexpr double kProbSumTolerance = 1e-9;
/// Looser bound for probabilities read from prediction files.
inline constexpr double kFileProbSumTolerance = 1e-6;
inline constexpr std::size_t kDefaultNumModes = 6;

/// K candidate trajectories with a categorical distribution over them.
struct TrajectoryDistribution {
  std::vector<CandidateTrajectory> modes;
  std::vector<double> probs;

  std::size_t num_modes() const { return modes.size(); }
  std::size_t horizon() const { return modes.empty() ? 0 : modes.front().size(); }

  /// Throws ValidationError mentioning `id` when an invariant does not hold.
  void validate(AgentId id, double sum_tolerance = kProbSumTolerance) const {
    const auto fail = [id](const std::string& what) {
      throw ValidationError("agent " + std::to_string(id) + ": " + what);
    };
    if (modes.empty()) fail("distribution has no modes");
    if (probs.size() != modes.size()) {
      fail(std::to_string(modes.size()) + " modes but " + std::to_string(probs.size()) +
           " probabilities");
    }
    double sum = 0.0;
    for (double p : probs) {
      if (!std::isfinite(p) || p < 0.0) fail("probabilities must be finite and >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > sum_tolerance) {
      fail("probabilities sum to " + json_io::Json(sum).dump() + ", not 1");
    }
    const std::size_t t = horizon();
    if (t == 0) fail("trajectories must have at least one step");
    for (const auto& m : modes) {
      if (m.size() != t) fail("modes have different lengths");
      for (const Vec3& p : m) {
        if (!is_finite(p)) fail("non-finite trajectory coordinate");
      }
    }
  }

  friend bool operator==(const TrajectoryDistribution&, const TrajectoryDistribution&) = default;
};

using DistributionMap = std::map<AgentId, TrajectoryDistribution>;

struct PredictorOutput {
  Group group_tag = Group::kAdv;
  DistributionMap per_agent;

  friend bool operator==(const PredictorOutput&, const PredictorOutput&) = default;
};

namespace detail {

inline const AgentState& require_current(const Scenario& scenario, AgentId id) {
  const Agent* a = scenario.find(id);
  if (a == nullptr) {
    throw ValidationError("agent " + std::to_string(id) + " is not in scenario '" +
                          scenario.scenario_id + "'");
  }
  if (!a->valid_now()) {
    throw ValidationError("agent " + std::to_string(id) + " has no valid current state");
  }
  return a->current();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Constant velocity with additive Gaussian noise

/**
 * Single-mode forecast: position(t) = current + v * (t * dt) + k * n_t, with
 * n_t drawn i.i.d. N(0, 1) for each of x, y, z at every step. z velocity is
 * zero. Noise is drawn even when k == 0 so stream consumption depends only
 * on (ids, T), in ascending id order, then step, then x/y/z.
 */
inline PredictorOutput predict_constant_velocity(const Scenario& scenario, const AgentIdSet& ids,
                                                 double noise_scale, RandomStream& rng,
                                                 Group tag = Group::kWorldO) {
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    throw ValidationError("noise scale must be finite and >= 0");
  }
  PredictorOutput out{tag, {}};
  for (AgentId id : ids) {
    const AgentState& s = detail::require_current(scenario, id);
    CandidateTrajectory traj;
    traj.reserve(scenario.horizon);
    for (std::size_t t = 1; t <= scenario.horizon; ++t) {
      const double tau = static_cast<double>(t) * scenario.dt;
      const double nx = rng.normal();
      const double ny = rng.normal();
      const double nz = rng.normal();
      traj.push_back({s.x + s.vx * tau + noise_scale * nx, s.y + s.vy * tau + noise_scale * ny,
                      s.z + noise_scale * nz});
    }
    TrajectoryDistribution dist{{std::move(traj)}, {1.0}};
    dist.validate(id);
    out.per_agent.emplace(id, std::move(dist));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic multimodal stand-in for a learned predictor

/**
 * Kinematic templates, in mode order:
 *   0 constant velocity, 1/2 left/right arc at low yaw rate,
 *   3/4 left/right arc at high yaw rate, 5 braking to a stop.
 * Every template moves the agent by a distance proportional to its current
 * speed, so a stationary agent stays exactly at its start in every mode
 * (unless position_noise > 0).
 */
struct SyntheticConfig {
  std::size_t num_modes = kDefaultNumModes;  // first num_modes templates are used, 1..6
  double low_yaw_rate = 0.1;                 // rad/s
  double high_yaw_rate = 0.3;                // rad/s
  double braking_decel = 3.0;                // m/s^2
  std::array<double, 6> template_logits = {1.5, 0.5, 0.5, -0.5, -0.5, 0.0};
  double logit_jitter = 0.3;    // std of per-agent Gaussian perturbation of each logit
  double position_noise = 0.0;  // std of per-coordinate noise on every mode position

  void validate() const {
    if (num_modes < 1 || num_modes > 6) throw ValidationError("synthetic.num_modes must be 1..6");
    for (double v : {low_yaw_rate, high_yaw_rate, braking_decel, logit_jitter, position_noise}) {
      if (!std::isfinite(v)) throw ValidationError("synthetic parameters must be finite");
    }
    if (!(braking_decel > 0.0)) throw ValidationError("synthetic.braking_decel must be > 0");
    if (logit_jitter < 0.0 || position_noise < 0.0) {
      throw ValidationError("synthetic noise parameters must be >= 0");
    }
    for (double l : template_logits) {
      if (!std::isfinite(l)) throw ValidationError("synthetic.template_logits must be finite");
    }
  }

  friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

namespace detail {

inline CandidateTrajectory arc_template(const AgentState& s, double speed, double theta0,
                                        double yaw_rate, std::size_t horizon, double dt) {
  CandidateTrajectory traj;
  traj.reserve(horizon);
  for (std::size_t t = 1; t <= horizon; ++t) {
    const double tau = static_cast<double>(t) * dt;
    double dx = 0.0;
    double dy = 0.0;
    if (yaw_rate == 0.0) {
      dx = speed * tau * std::cos(theta0);
      dy = speed * tau * std::sin(theta0);
    } else {
      const double r = speed / yaw_rate;
      dx = r * (std::sin(theta0 + yaw_rate * tau) - std::sin(theta0));
      dy = -r * (std::cos(theta0 + yaw_rate * tau) - std::cos(theta0));
    }
    traj.push_back({s.x + dx, s.y + dy, s.z});
  }
  return traj;
}

inline CandidateTrajectory braking_template(const AgentState& s, double speed, double theta0,
                                            double decel, std::size_t horizon, double dt) {
  CandidateTrajectory traj;
  traj.reserve(horizon);
  const double t_stop = speed / decel;
  for (std::size_t t = 1; t <= horizon; ++t) {
    const double tau = static_cast<double>(t) * dt;
    const double dist =
        tau < t_stop ? speed * tau - 0.5 * decel * tau * tau : speed * speed / (2.0 * decel);
    traj.push_back({s.x + dist * std::cos(theta0), s.y + dist * std::sin(theta0), s.z});
  }
  return traj;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace detail

/**
 * Multimodal forecast with the output shape of a learned model: K modes and
 * a categorical distribution per agent. Fully determined by
 * (scenario, config, rng state). Stream consumption per agent, in ascending
 * id order: K logit perturbations, then (if position_noise > 0) K*T*3
 * position perturbations.
 */
inline PredictorOutput predict_synthetic_multimodal(const Scenario& scenario,
                                                    const AgentIdSet& ids,
                                                    const SyntheticConfig& config,
                                                    RandomStream& rng,
                                                    Group tag = Group::kAdv) {
  config.validate();
  constexpr double kStationarySpeed = 1e-6;
  PredictorOutput out{tag, {}};
  for (AgentId id : ids) {
    const AgentState& s = detail::require_current(scenario, id);
    const double speed = std::hypot(s.vx, s.vy);
    const double theta0 = speed > kStationarySpeed ? std::atan2(s.vy, s.vx) : s.heading;
    const std::size_t horizon = scenario.horizon;
    const double dt = scenario.dt;

    TrajectoryDistribution dist;
    for (std::size_t m = 0; m < config.num_modes; ++m) {
      switch (m) {
        case 0: dist.modes.push_back(detail::arc_template(s, speed, theta0, 0.0, horizon, dt)); break;
        case 1: dist.modes.push_back(detail::arc_template(s, speed, theta0, config.low_yaw_rate, horizon, dt)); break;
        case 2: dist.modes.push_back(detail::arc_template(s, speed, theta0, -config.low_yaw_rate, horizon, dt)); break;
        case 3: dist.modes.push_back(detail::arc_template(s, speed, theta0, config.high_yaw_rate, horizon, dt)); break;
        case 4: dist.modes.push_back(detail::arc_template(s, speed, theta0, -config.high_yaw_rate, horizon, dt)); break;
        default: dist.modes.push_back(detail::braking_template(s, speed, theta0, config.braking_decel, horizon, dt)); break;
      }
    }
    if (speed <= kStationarySpeed) {
      // Exactly at rest, whatever the closed forms round to.
      for (auto& mode : dist.modes) {
        std::fill(mode.begin(), mode.end(), s.position());
      }
    }

    std::vector<double> logits(config.num_modes);
    for (std::size_t m = 0; m < config.num_modes; ++m) {
      logits[m] = config.template_logits[m] + config.logit_jitter * rng.normal();
    }
    dist.probs = detail::softmax(logits);

    if (config.position_noise > 0.0) {
      for (auto& mode : dist.modes) {
        for (Vec3& p : mode) {
          p.x += config.position_noise * rng.normal();
          p.y += config.position_noise * rng.normal();
          p.z += config.position_noise * rng.normal();
        }
      }
    }
    dist.validate(id);
    out.per_agent.emplace(id, std::move(dist));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prediction files: {"agents": {"<id>": {"probs": [...], "modes": [[[x,y,z], ...], ...]}}}

inline json_io::OrderedJson predictions_to_json(const DistributionMap& dists) {
  json_io::OrderedJson agents = json_io::OrderedJson::object();
  for (const auto& [id, d] : dists) {
    json_io::OrderedJson modes = json_io::OrderedJson::array();
    for (const auto& mode : d.modes) {
      json_io::OrderedJson steps = json_io::OrderedJson::array();
      for (const Vec3& p : mode) steps.push_back({p.x, p.y, p.z});
      modes.push_back(std::move(steps));
    }
    agents[std::to_string(id)] = {{"probs", d.probs}, {"modes", std::move(modes)}};
  }
  return {{"agents", std::move(agents)}};
}

inline AgentId parse_agent_key(const std::string& key, const std::string& path) {
  std::size_t used = 0;
  long long id = -1;
  try {
    id = std::stoll(key, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != key.size() || key.empty() || id < 0 || std::to_string(id) != key) {
    throw SchemaError(path + ": key '" + key + "' is not a non-negative agent id");
  }
  return static_cast<AgentId>(id);
}

inline Vec3 vec3_from_json(const json_io::Json& j, const std::string& path) {
  const auto& a = json_io::as_array(j, path);
  if (a.size() != 3) throw SchemaError(path + ": expected [x, y, z]");
  return {json_io::as_number(a[0], json_io::index_path(path, 0)),
          json_io::as_number(a[1], json_io::index_path(path, 1)),
          json_io::as_number(a[2], json_io::index_path(path, 2))};
}

inline CandidateTrajectory trajectory_from_json(const json_io::Json& j, const std::string& path) {
  const auto& steps = json_io::as_array(j, path);
  CandidateTrajectory traj;
  traj.reserve(steps.size());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    traj.push_back(vec3_from_json(steps[t], json_io::index_path(path, t)));
  }
  return traj;
}

/// Distributions are kept exactly as stored; sums only need to be within 1e-6 of one.
inline DistributionMap predictions_from_json(const json_io::Json& j) {
  json_io::ObjectReader root(j, "");
  const auto& agents = root.required("agents");
  if (!agents.is_object()) json_io::type_mismatch("agents", "object", agents);
  DistributionMap out;
  for (const auto& [key, value] : agents.items()) {
    const std::string path = "agents." + key;
    const AgentId id = parse_agent_key(key, "agents");
    json_io::ObjectReader r(value, path);
    TrajectoryDistribution d;
    const auto& probs = json_io::as_array(r.required("probs"), r.field("probs"));
    for (std::size_t i = 0; i < probs.size(); ++i) {
      d.probs.push_back(json_io::as_number(probs[i], json_io::index_path(r.field("probs"), i)));
    }
    const auto& modes = json_io::as_array(r.required("modes"), r.field("modes"));
    for (std::size_t m = 0; m < modes.size(); ++m) {
      d.modes.push_back(trajectory_from_json(modes[m], json_io::index_path(r.field("modes"), m)));
    }
    r.finish();
    d.validate(id, kFileProbSumTolerance);
    out.emplace(id, std::move(d));
  }
  root.finish();
  return out;
}

inline DistributionMap load_predictions(const std::filesystem::path& path) {
  return predictions_from_json(json_io::parse_file(path));
}

inline void save_predictions(const DistributionMap& dists, const std::filesystem::path& path) {
  json_io::write_text_file(path, predictions_to_json(dists).dump() + "\n");
}

/// Picks `ids` out of an already-loaded prediction set.
inline PredictorOutput select_predictions(const DistributionMap& all, const AgentIdSet& ids,
                                          Group tag) {
  PredictorOutput out{tag, {}};
  for (AgentId id : ids) {
    const auto it = all.find(id);
    if (it == all.end()) throw ValidationError("no prediction for agent " + std::to_string(id));
    out.per_agent.emplace(id, it->second);
  }
  return out;
}

inline PredictorOutput predict_from_file(const std::filesystem::path& path, const AgentIdSet& ids,
                                         Group tag = Group::kAdv) {
  return select_predictions(load_predictions(path), ids, tag);
}

// ---------------------------------------------------------------------------
// Pluggable predictor bindings

/// A motion model bound to a simulation group. Implementations are immutable
/// once constructed and may be shared across threads.
class MotionPredictor {
 public:
  virtual ~MotionPredictor() = default;

  virtual PredictorOutput predict(const Scenario& scenario, const AgentIdSet& ids, Group tag,
                                  RandomStream& rng) const = 0;

  /// Binding string as written in a rollout config file.
  virtual std::string binding() const = 0;
};

class ConstantVelocityPredictor final : public MotionPredictor {
 public:
  explicit ConstantVelocityPredictor(double noise_scale) : noise_scale_(noise_scale) {}

  PredictorOutput predict(const Scenario& scenario, const AgentIdSet& ids, Group tag,
                          RandomStream& rng) const override {
    return predict_constant_velocity(scenario, ids, noise_scale_, rng, tag);
  }
  std::string binding() const override { return "constant_velocity"; }

 private:
  double noise_scale_;
};

class SyntheticPredictor final : public MotionPredictor {
 public:
  explicit SyntheticPredictor(SyntheticConfig config) : config_(config) { config_.validate(); }

  PredictorOutput predict(const Scenario& scenario, const AgentIdSet& ids, Group tag,
                          RandomStream& rng) const override {
    return predict_synthetic_multimodal(scenario, ids, config_, rng, tag);
  }
  std::string binding() const override { return "synthetic"; }

 private:
  SyntheticConfig config_;
};

/// Serves distributions exported offline; the file is read once at construction.
class FilePredictor final : public MotionPredictor {
 public:
  FilePredictor(std::filesystem::path path, std::string binding)
      : binding_(std::move(binding)), dists_(load_predictions(path)) {}

  PredictorOutput predict(const Scenario& scenario, const AgentIdSet& ids, Group tag,
                          RandomStream&) const override {
    PredictorOutput out = select_predictions(dists_, ids, tag);
    for (const auto& [id, d] : out.per_agent) {
      if (d.horizon() != scenario.horizon) {
        throw ValidationError("agent " + std::to_string(id) + ": prediction has " +
                              std::to_string(d.horizon()) + " steps, scenario horizon is " +
                              std::to_string(scenario.horizon));
      }
    }
    return out;
  }
  std::string binding() const override { return binding_; }

 private:
  std::string binding_;
  DistributionMap dists_;
};

}  // namespace cadsim
