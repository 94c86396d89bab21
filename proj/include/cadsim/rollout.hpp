#pragma once

// Rollout pipeline: partition, per-group prediction, group-isolated
// resampling, World-o sampling, heading estimation, aggregation.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cadsim/cad.hpp"
#include "cadsim/error.hpp"
#include "cadsim/json_io.hpp"
#include "cadsim/kinematics.hpp"
#include "cadsim/predictors.hpp"
#include "cadsim/rng.hpp"
#include "cadsim/scenario.hpp"

namespace cadsim {

struct PredictorBindings {
  std::string adv = "synthetic";
  std::string world_p = "synthetic";
  std::string world_o = "constant_velocity";

  friend bool operator==(const PredictorBindings&, const PredictorBindings&) = default;
};

struct RolloutConfig {
  std::size_t num_rollouts = 32;
  double noise_scale = 0.01;
  CadConfig cad;
  PredictorBindings predictors;
  SyntheticConfig synthetic;
  std::uint64_t master_seed = 0;

  void validate() const {
    if (num_rollouts < 1) throw ValidationError("num_rollouts must be >= 1");
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
      throw ValidationError("noise_scale must be finite and >= 0");
    }
    cad.validate();
    synthetic.validate();
  }

  friend bool operator==(const RolloutConfig&, const RolloutConfig&) = default;
};

/// Random streams are keyed by (master_seed, rollout_index, group, purpose).
enum class StreamPurpose : std::uint64_t { kPredict = 1, kSample = 2 };

inline RandomStream group_stream(std::uint64_t master_seed, std::size_t rollout_index, Group group,
                                 StreamPurpose purpose) {
  return RandomStream::from_seed(master_seed)
      .derive(rollout_index)
      .derive(static_cast<std::uint64_t>(group))
      .derive(static_cast<std::uint64_t>(purpose));
}

struct CadDiagnostics {
  std::size_t trials = 0;
  bool collision_free = false;

  friend bool operator==(const CadDiagnostics&, const CadDiagnostics&) = default;
};

/// Empty when the group had no resampling run (no ADV, or empty World-p).
struct RolloutDiagnostics {
  std::optional<CadDiagnostics> adv;
  std::optional<CadDiagnostics> world_p;

  friend bool operator==(const RolloutDiagnostics&, const RolloutDiagnostics&) = default;
};

struct Rollout {
  std::map<AgentId, PoseTrajectory> agents;
  RolloutDiagnostics diagnostics;

  friend bool operator==(const Rollout&, const Rollout&) = default;
};

struct RolloutBatch {
  std::string scenario_id;
  RolloutConfig config;
  Partition partition;
  std::vector<Rollout> rollouts;

  friend bool operator==(const RolloutBatch&, const RolloutBatch&) = default;
};

/// One predictor per group. Shared pointers so rollout workers can share them.
struct GroupPredictors {
  std::shared_ptr<const MotionPredictor> adv;
  std::shared_ptr<const MotionPredictor> world_p;
  std::shared_ptr<const MotionPredictor> world_o;
};

/// Resolves a binding string; `file:` paths are relative to `base_dir`.
inline std::shared_ptr<const MotionPredictor> make_predictor(const std::string& binding,
                                                             const RolloutConfig& config,
                                                             const std::filesystem::path& base_dir) {
  if (binding == "synthetic") return std::make_shared<SyntheticPredictor>(config.synthetic);
  if (binding == "constant_velocity") {
    return std::make_shared<ConstantVelocityPredictor>(config.noise_scale);
  }
  constexpr std::string_view kFilePrefix = "file:";
  if (binding.starts_with(kFilePrefix)) {
    std::filesystem::path p = binding.substr(kFilePrefix.size());
    if (p.empty()) throw ValidationError("empty path in predictor binding '" + binding + "'");
    if (p.is_relative()) p = base_dir / p;
    return std::make_shared<FilePredictor>(p, binding);
  }
  throw ValidationError("unknown predictor binding '" + binding +
                        "' (expected synthetic, constant_velocity or file:<path>)");
}

inline GroupPredictors make_predictors(const RolloutConfig& config,
                                       const std::filesystem::path& base_dir = ".") {
  return {make_predictor(config.predictors.adv, config, base_dir),
          make_predictor(config.predictors.world_p, config, base_dir),
          make_predictor(config.predictors.world_o, config, base_dir)};
}

namespace detail {

/// Re-raises the in-flight library error with `prefix` prepended, keeping its category.
[[noreturn]] inline void rethrow_with_prefix(const std::string& prefix) {
  try {
    throw;
  } catch (const SchemaError& e) {
    throw SchemaError(prefix + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(prefix + e.what());
  } catch (const IoError& e) {
    throw IoError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

inline PredictorOutput run_predictor(const MotionPredictor& predictor, const Scenario& scenario,
                                     const AgentIdSet& ids, Group group, RandomStream& rng) {
  PredictorOutput out = predictor.predict(scenario, ids, group, rng);
  for (AgentId id : ids) {
    const auto it = out.per_agent.find(id);
    if (it == out.per_agent.end()) {
      throw ValidationError("no prediction for agent " + std::to_string(id));
    }
    if (it->second.horizon() != scenario.horizon) {
      throw ValidationError("agent " + std::to_string(id) + ": prediction has " +
                            std::to_string(it->second.horizon()) + " steps, horizon is " +
                            std::to_string(scenario.horizon));
    }
  }
  if (out.per_agent.size() != ids.size()) {
    throw ValidationError("predictor returned agents that were not requested");
  }
  return out;
}

/// Learned-model group: predict over ADV and World-p jointly, resample, keep `keep`.
inline CadDiagnostics simulate_learned_group(const Scenario& scenario, const Partition& partition,
                                             const RolloutConfig& config,
                                             const MotionPredictor& predictor, Group group,
                                             std::size_t rollout_index, const AgentIdSet& keep,
                                             std::map<AgentId, CandidateTrajectory>& out) {
  RandomStream predict_rng =
      group_stream(config.master_seed, rollout_index, group, StreamPurpose::kPredict);
  RandomStream sample_rng =
      group_stream(config.master_seed, rollout_index, group, StreamPurpose::kSample);
  const PredictorOutput pred =
      run_predictor(predictor, scenario, partition.adv_and_world_p(), group, predict_rng);
  CadResult cad = cad_resample(pred.per_agent, config.cad, sample_rng);
  for (AgentId id : keep) out.emplace(id, std::move(cad.trajectories.at(id)));
  return {cad.trials_used, cad.collision_free};
}

}  // namespace detail

/**
 * One joint future for every partitioned agent.
 *
 * Each group reads only its own predictor and its own streams, so the ADV
 * trajectory cannot depend on the World-p or World-o bindings and vice versa.
 */
inline Rollout simulate_one(const Scenario& scenario, const Partition& partition,
                            const RolloutConfig& config, const GroupPredictors& predictors,
                            std::size_t rollout_index) {
  if (rollout_index >= config.num_rollouts) {
    throw ValidationError("rollout index " + std::to_string(rollout_index) +
                          " out of range for num_rollouts " + std::to_string(config.num_rollouts));
  }
  std::map<AgentId, CandidateTrajectory> kept;
  Rollout rollout;

  if (partition.adv) {
    try {
      rollout.diagnostics.adv = detail::simulate_learned_group(
          scenario, partition, config, *predictors.adv, Group::kAdv, rollout_index,
          AgentIdSet{*partition.adv}, kept);
    } catch (const Error&) {
      detail::rethrow_with_prefix("adv group: ");
    }
  }

  if (!partition.world_p.empty()) {
    try {
      rollout.diagnostics.world_p = detail::simulate_learned_group(
          scenario, partition, config, *predictors.world_p, Group::kWorldP, rollout_index,
          partition.world_p, kept);
    } catch (const Error&) {
      detail::rethrow_with_prefix("world_p group: ");
    }
  }

  if (!partition.world_o.empty()) {
    try {
      RandomStream predict_rng = group_stream(config.master_seed, rollout_index, Group::kWorldO,
                                              StreamPurpose::kPredict);
      RandomStream sample_rng = group_stream(config.master_seed, rollout_index, Group::kWorldO,
                                             StreamPurpose::kSample);
      PredictorOutput pred = detail::run_predictor(*predictors.world_o, scenario,
                                                   partition.world_o, Group::kWorldO, predict_rng);
      for (auto& [id, dist] : pred.per_agent) {
        dist.validate(id, kFileProbSumTolerance);
        const std::size_t mode = sample_categorical(dist.probs, sample_rng);
        kept.emplace(id, std::move(dist.modes[mode]));
      }
    } catch (const Error&) {
      detail::rethrow_with_prefix("world_o group: ");
    }
  }

  for (auto& [id, positions] : kept) {
    const AgentState& current = scenario.agent(id).current();
    rollout.agents.emplace(id, make_pose_trajectory(std::move(positions), current.position(),
                                                    current.heading));
  }
  return rollout;
}

/**
 * num_rollouts independent rollouts. Rollout i depends only on
 * (scenario, config, i); `jobs` workers (0 = hardware concurrency) share
 * nothing mutable. If any rollout fails, the error of the lowest failing
 * index is rethrown with that index attached.
 */
inline RolloutBatch simulate_batch(const Scenario& scenario, const RolloutConfig& config,
                                   const GroupPredictors& predictors, std::size_t jobs = 1) {
  config.validate();
  validate(scenario);
  RolloutBatch batch;
  batch.scenario_id = scenario.scenario_id;
  batch.config = config;
  batch.partition = partition_agents(scenario);
  batch.rollouts.resize(config.num_rollouts);

  std::vector<std::exception_ptr> errors(config.num_rollouts);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < config.num_rollouts; i = next++) {
      try {
        batch.rollouts[i] = simulate_one(scenario, batch.partition, config, predictors, i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, config.num_rollouts);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(jobs);
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error&) {
      detail::rethrow_with_prefix("rollout " + std::to_string(i) + ": ");
    }
  }
  return batch;
}

inline RolloutBatch simulate_batch(const Scenario& scenario, const RolloutConfig& config,
                                   const std::filesystem::path& base_dir = ".",
                                   std::size_t jobs = 1) {
  return simulate_batch(scenario, config, make_predictors(config, base_dir), jobs);
}

// ---------------------------------------------------------------------------
// Config file

inline std::string_view to_string(DistanceMode mode) {
  return mode == DistanceMode::k3d ? "3d" : "xy";
}

inline json_io::OrderedJson config_to_json(const RolloutConfig& c) {
  json_io::OrderedJson j;
  j["num_rollouts"] = c.num_rollouts;
  j["noise_scale"] = c.noise_scale;
  j["master_seed"] = c.master_seed;
  j["cad"] = {{"max_trials", c.cad.max_trials},
              {"collision_threshold", c.cad.collision_threshold},
              {"distance_mode", std::string(to_string(c.cad.distance_mode))},
              {"spatial_hash", c.cad.spatial_hash}};
  j["predictors"] = {
      {"adv", c.predictors.adv}, {"world_p", c.predictors.world_p}, {"world_o", c.predictors.world_o}};
  j["synthetic"] = {{"num_modes", c.synthetic.num_modes},
                    {"low_yaw_rate", c.synthetic.low_yaw_rate},
                    {"high_yaw_rate", c.synthetic.high_yaw_rate},
                    {"braking_decel", c.synthetic.braking_decel},
                    {"template_logits", c.synthetic.template_logits},
                    {"logit_jitter", c.synthetic.logit_jitter},
                    {"position_noise", c.synthetic.position_noise}};
  return j;
}

/// Every key is optional and falls back to the RolloutConfig default; unknown keys are rejected.
inline RolloutConfig config_from_json(const json_io::Json& j) {
  RolloutConfig c;
  json_io::ObjectReader root(j, "");
  if (const auto* v = root.optional("num_rollouts")) {
    c.num_rollouts = json_io::as_unsigned(*v, "num_rollouts");
  }
  if (const auto* v = root.optional("noise_scale")) c.noise_scale = json_io::as_number(*v, "noise_scale");
  if (const auto* v = root.optional("master_seed")) c.master_seed = json_io::as_unsigned(*v, "master_seed");
  if (const auto* v = root.optional("cad")) {
    json_io::ObjectReader r(*v, "cad");
    if (const auto* f = r.optional("max_trials")) c.cad.max_trials = json_io::as_unsigned(*f, r.field("max_trials"));
    if (const auto* f = r.optional("collision_threshold")) {
      c.cad.collision_threshold = json_io::as_number(*f, r.field("collision_threshold"));
    }
    if (const auto* f = r.optional("distance_mode")) {
      const auto& mode = json_io::as_string(*f, r.field("distance_mode"));
      if (mode == "3d") {
        c.cad.distance_mode = DistanceMode::k3d;
      } else if (mode == "xy") {
        c.cad.distance_mode = DistanceMode::kXy;
      } else {
        throw SchemaError(r.field("distance_mode") + ": expected \"3d\" or \"xy\"");
      }
    }
    if (const auto* f = r.optional("spatial_hash")) c.cad.spatial_hash = json_io::as_bool(*f, r.field("spatial_hash"));
    r.finish();
  }
  if (const auto* v = root.optional("predictors")) {
    json_io::ObjectReader r(*v, "predictors");
    if (const auto* f = r.optional("adv")) c.predictors.adv = json_io::as_string(*f, r.field("adv"));
    if (const auto* f = r.optional("world_p")) c.predictors.world_p = json_io::as_string(*f, r.field("world_p"));
    if (const auto* f = r.optional("world_o")) c.predictors.world_o = json_io::as_string(*f, r.field("world_o"));
    r.finish();
  }
  if (const auto* v = root.optional("synthetic")) {
    json_io::ObjectReader r(*v, "synthetic");
    auto& s = c.synthetic;
    if (const auto* f = r.optional("num_modes")) s.num_modes = json_io::as_unsigned(*f, r.field("num_modes"));
    if (const auto* f = r.optional("low_yaw_rate")) s.low_yaw_rate = json_io::as_number(*f, r.field("low_yaw_rate"));
    if (const auto* f = r.optional("high_yaw_rate")) s.high_yaw_rate = json_io::as_number(*f, r.field("high_yaw_rate"));
    if (const auto* f = r.optional("braking_decel")) s.braking_decel = json_io::as_number(*f, r.field("braking_decel"));
    if (const auto* f = r.optional("template_logits")) {
      const auto& arr = json_io::as_array(*f, r.field("template_logits"));
      if (arr.size() != s.template_logits.size()) {
        throw SchemaError(r.field("template_logits") + ": expected 6 numbers");
      }
      for (std::size_t i = 0; i < arr.size(); ++i) {
        s.template_logits[i] = json_io::as_number(arr[i], json_io::index_path(r.field("template_logits"), i));
      }
    }
    if (const auto* f = r.optional("logit_jitter")) s.logit_jitter = json_io::as_number(*f, r.field("logit_jitter"));
    if (const auto* f = r.optional("position_noise")) s.position_noise = json_io::as_number(*f, r.field("position_noise"));
    r.finish();
  }
  root.finish();
  c.validate();
  return c;
}

inline RolloutConfig load_config(const std::filesystem::path& path) {
  return config_from_json(json_io::parse_file(path));
}

// ---------------------------------------------------------------------------
// Rollout batch file

inline json_io::OrderedJson batch_to_json(const RolloutBatch& b) {
  json_io::OrderedJson j;
  j["scenario_id"] = b.scenario_id;
  j["config"] = config_to_json(b.config);
  json_io::OrderedJson part;
  part["adv"] = b.partition.adv ? json_io::OrderedJson(*b.partition.adv) : json_io::OrderedJson(nullptr);
  part["world_p"] = b.partition.world_p;
  part["world_o"] = b.partition.world_o;
  j["partition"] = std::move(part);
  auto rollouts = json_io::OrderedJson::array();
  for (const Rollout& r : b.rollouts) {
    json_io::OrderedJson agents = json_io::OrderedJson::object();
    for (const auto& [id, pose] : r.agents) {
      auto positions = json_io::OrderedJson::array();
      for (const Vec3& p : pose.positions) positions.push_back({p.x, p.y, p.z});
      agents[std::to_string(id)] = {{"positions", std::move(positions)}, {"headings", pose.headings}};
    }
    json_io::OrderedJson diag = json_io::OrderedJson::object();
    if (r.diagnostics.adv) {
      diag["adv_trials"] = r.diagnostics.adv->trials;
      diag["adv_collision_free"] = r.diagnostics.adv->collision_free;
    }
    if (r.diagnostics.world_p) {
      diag["world_p_trials"] = r.diagnostics.world_p->trials;
      diag["world_p_collision_free"] = r.diagnostics.world_p->collision_free;
    }
    rollouts.push_back({{"agents", std::move(agents)}, {"diagnostics", std::move(diag)}});
  }
  j["rollouts"] = std::move(rollouts);
  return j;
}

inline std::string serialize_batch(const RolloutBatch& b) { return batch_to_json(b).dump() + "\n"; }

namespace detail {

inline AgentIdSet id_set_from_json(const json_io::Json& j, const std::string& path) {
  const auto& arr = json_io::as_array(j, path);
  AgentIdSet out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto id = json_io::as_integer(arr[i], json_io::index_path(path, i));
    if (!out.insert(id).second) throw SchemaError(path + ": duplicate id " + std::to_string(id));
  }
  return out;
}

inline std::optional<CadDiagnostics> diagnostics_from_json(json_io::ObjectReader& r,
                                                           const std::string& prefix) {
  const auto* trials = r.optional(prefix + "_trials");
  const auto* free = r.optional(prefix + "_collision_free");
  if ((trials == nullptr) != (free == nullptr)) {
    throw SchemaError(r.path() + ": " + prefix + "_trials and " + prefix +
                      "_collision_free must appear together");
  }
  if (trials == nullptr) return std::nullopt;
  return CadDiagnostics{json_io::as_unsigned(*trials, r.field(prefix + "_trials")),
                        json_io::as_bool(*free, r.field(prefix + "_collision_free"))};
}

}  // namespace detail

/// Checks the structural invariants a batch file must satisfy.
inline void validate_batch(const RolloutBatch& b) {
  b.config.validate();
  if (b.rollouts.size() != b.config.num_rollouts) {
    throw ValidationError("batch has " + std::to_string(b.rollouts.size()) +
                          " rollouts, config says " + std::to_string(b.config.num_rollouts));
  }
  const AgentIdSet expected = b.partition.all();
  const std::size_t groups_total = b.partition.world_p.size() + b.partition.world_o.size() +
                                   (b.partition.adv ? 1 : 0);
  if (expected.size() != groups_total) throw ValidationError("partition groups overlap");
  std::optional<std::size_t> horizon;
  for (std::size_t i = 0; i < b.rollouts.size(); ++i) {
    const Rollout& r = b.rollouts[i];
    const std::string where = "rollout " + std::to_string(i) + ": ";
    AgentIdSet got;
    for (const auto& [id, pose] : r.agents) {
      got.insert(id);
      if (pose.headings.size() != pose.positions.size()) {
        throw ValidationError(where + "agent " + std::to_string(id) + " positions/headings length mismatch");
      }
      if (!horizon) horizon = pose.size();
      if (pose.size() != *horizon || pose.size() == 0) {
        throw ValidationError(where + "agent " + std::to_string(id) + " has inconsistent length");
      }
      for (const Vec3& p : pose.positions) {
        if (!is_finite(p)) throw ValidationError(where + "non-finite position");
      }
      for (double h : pose.headings) {
        if (!std::isfinite(h) || h <= -std::numbers::pi || h > std::numbers::pi) {
          throw ValidationError(where + "heading outside (-pi, pi]");
        }
      }
    }
    if (got != expected) throw ValidationError(where + "agents do not match the partition");
    const auto check = [&](const std::optional<CadDiagnostics>& d, bool expect, const char* name) {
      if (d.has_value() != expect) {
        throw ValidationError(where + std::string(name) + " diagnostics " +
                              (expect ? "missing" : "unexpected"));
      }
      if (d && (d->trials < 1 || d->trials > b.config.cad.max_trials)) {
        throw ValidationError(where + std::string(name) + " trials outside [1, max_trials]");
      }
    };
    check(r.diagnostics.adv, b.partition.adv.has_value(), "adv");
    check(r.diagnostics.world_p, !b.partition.world_p.empty(), "world_p");
  }
}

inline RolloutBatch batch_from_json(const json_io::Json& j) {
  json_io::ObjectReader root(j, "");
  RolloutBatch b;
  b.scenario_id = root.string("scenario_id");
  b.config = config_from_json(root.required("config"));
  {
    json_io::ObjectReader p(root.required("partition"), "partition");
    const auto& adv = p.required("adv");
    if (!adv.is_null()) b.partition.adv = json_io::as_integer(adv, p.field("adv"));
    b.partition.world_p = detail::id_set_from_json(p.required("world_p"), p.field("world_p"));
    b.partition.world_o = detail::id_set_from_json(p.required("world_o"), p.field("world_o"));
    p.finish();
  }
  const auto& rollouts = json_io::as_array(root.required("rollouts"), "rollouts");
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const std::string path = json_io::index_path("rollouts", i);
    json_io::ObjectReader r(rollouts[i], path);
    Rollout rollout;
    const auto& agents = r.required("agents");
    if (!agents.is_object()) json_io::type_mismatch(r.field("agents"), "object", agents);
    for (const auto& [key, value] : agents.items()) {
      const std::string apath = r.field("agents") + "." + key;
      const AgentId id = parse_agent_key(key, r.field("agents"));
      json_io::ObjectReader a(value, apath);
      PoseTrajectory pose;
      pose.positions = trajectory_from_json(a.required("positions"), a.field("positions"));
      const auto& headings = json_io::as_array(a.required("headings"), a.field("headings"));
      for (std::size_t t = 0; t < headings.size(); ++t) {
        pose.headings.push_back(json_io::as_number(headings[t], json_io::index_path(a.field("headings"), t)));
      }
      a.finish();
      rollout.agents.emplace(id, std::move(pose));
    }
    json_io::ObjectReader d(r.required("diagnostics"), r.field("diagnostics"));
    rollout.diagnostics.adv = detail::diagnostics_from_json(d, "adv");
    rollout.diagnostics.world_p = detail::diagnostics_from_json(d, "world_p");
    d.finish();
    r.finish();
    b.rollouts.push_back(std::move(rollout));
  }
  root.finish();
  validate_batch(b);
  return b;
}

inline RolloutBatch load_batch(const std::filesystem::path& path) {
  return batch_from_json(json_io::parse_file(path));
}

inline void save_batch(const RolloutBatch& b, const std::filesystem::path& path) {
  json_io::write_text_file(path, serialize_batch(b));
}

/// Per-step rows for external plotting: rollout,agent_id,step,x,y,z,heading.
inline std::string batch_to_csv(const RolloutBatch& b) {
  std::ostringstream out;
  out.precision(17);
  out << "rollout,agent_id,step,x,y,z,heading\n";
  for (std::size_t i = 0; i < b.rollouts.size(); ++i) {
    for (const auto& [id, pose] : b.rollouts[i].agents) {
      for (std::size_t t = 0; t < pose.size(); ++t) {
        const Vec3& p = pose.positions[t];
        out << i << ',' << id << ',' << (t + 1) << ',' << p.x << ',' << p.y << ',' << p.z << ','
            << pose.headings[t] << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace cadsim
