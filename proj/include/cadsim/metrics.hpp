#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cadsim/cad.hpp"
#include "cadsim/error.hpp"
#include "cadsim/json_io.hpp"
#include "cadsim/rollout.hpp"
#include "cadsim/scenario.hpp"

namespace cadsim {

/// Observed futures keyed by agent id; each entry has one state per horizon step.
using GroundTruthFuture = std::map<AgentId, std::vector<AgentState>>;

inline GroundTruthFuture ground_truth_from_json(const json_io::Json& j) {
  if (!j.is_object()) json_io::type_mismatch("<root>", "object", j);
  GroundTruthFuture truth;
  for (const auto& [key, value] : j.items()) {
    const AgentId id = parse_agent_key(key, "<root>");
    truth.emplace(id, agent_states_from_json(value, key));
  }
  return truth;
}

inline json_io::OrderedJson ground_truth_to_json(const GroundTruthFuture& truth) {
  json_io::OrderedJson j = json_io::OrderedJson::object();
  for (const auto& [id, states] : truth) {
    auto arr = json_io::OrderedJson::array();
    for (const AgentState& s : states) arr.push_back(agent_state_to_json(s));
    j[std::to_string(id)] = std::move(arr);
  }
  return j;
}

inline GroundTruthFuture load_ground_truth(const std::filesystem::path& path) {
  return ground_truth_from_json(json_io::parse_file(path));
}

inline void save_ground_truth(const GroundTruthFuture& truth, const std::filesystem::path& path) {
  json_io::write_text_file(path, ground_truth_to_json(truth).dump(2) + "\n");
}

struct MinAdeOptions {
  bool scored_only = false;  // restrict to ADV and World-p agents
};

struct MinAdeResult {
  double value = 0.0;
  std::size_t agents_used = 0;
  std::vector<AgentId> skipped;  // agents without a single valid truth step
};

/**
 * Mean over agents of the best (over rollouts) average xy displacement
 * error, averaged over the agent's valid truth steps.
 */
inline MinAdeResult compute_min_ade_detailed(const RolloutBatch& batch,
                                             const GroundTruthFuture& truth,
                                             const MinAdeOptions& options = {}) {
  if (batch.rollouts.empty()) throw ValidationError("minADE needs at least one rollout");
  const AgentIdSet agents =
      options.scored_only ? batch.partition.adv_and_world_p() : batch.partition.all();

  MinAdeResult result;
  double sum = 0.0;
  for (AgentId id : agents) {
    const auto it = truth.find(id);
    if (it == truth.end()) {
      throw ValidationError("no ground truth for agent " + std::to_string(id));
    }
    const std::vector<AgentState>& gt = it->second;
    std::size_t valid_steps = 0;
    for (const AgentState& s : gt) valid_steps += s.valid ? 1 : 0;
    if (valid_steps == 0) {
      result.skipped.push_back(id);
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    for (const Rollout& r : batch.rollouts) {
      const auto pit = r.agents.find(id);
      if (pit == r.agents.end()) {
        throw ValidationError("rollout lacks agent " + std::to_string(id));
      }
      const auto& positions = pit->second.positions;
      if (positions.size() != gt.size()) {
        throw ValidationError("agent " + std::to_string(id) + ": ground truth has " +
                              std::to_string(gt.size()) + " steps, rollout has " +
                              std::to_string(positions.size()));
      }
      double err = 0.0;
      for (std::size_t t = 0; t < gt.size(); ++t) {
        if (gt[t].valid) err += xy_distance(positions[t], gt[t].position());
      }
      best = std::min(best, err / static_cast<double>(valid_steps));
    }
    sum += best;
    ++result.agents_used;
  }
  if (result.agents_used == 0) throw ValidationError("minADE: no agent has valid ground truth");
  result.value = sum / static_cast<double>(result.agents_used);
  return result;
}

inline double compute_min_ade(const RolloutBatch& batch, const GroundTruthFuture& truth,
                              const MinAdeOptions& options = {}) {
  return compute_min_ade_detailed(batch, truth, options).value;
}

struct BatchMetrics {
  std::string scenario_id;
  std::size_t num_rollouts = 0;
  std::optional<double> min_ade;
  double residual_collision_rate = 0.0;
  double mean_trials_adv = 0.0;      // 0 when no rollout ran ADV resampling
  double mean_trials_world_p = 0.0;  // 0 when no rollout ran World-p resampling
  std::size_t distinct_rollout_count = 0;
};

/// True when any two kept trajectories of `r`, from any groups, come closer than `threshold`.
inline bool rollout_has_collision(const Rollout& r, double threshold,
                                  DistanceMode mode = DistanceMode::k3d) {
  std::vector<TrackRef> refs;
  refs.reserve(r.agents.size());
  for (const auto& [id, pose] : r.agents) refs.push_back({id, &pose.positions});
  return detect_collision_scan(refs, threshold, mode).collision;
}

inline BatchMetrics compute_batch_metrics(const RolloutBatch& batch, double threshold,
                                          DistanceMode mode = DistanceMode::k3d,
                                          const GroundTruthFuture* truth = nullptr,
                                          const MinAdeOptions& options = {}) {
  if (batch.rollouts.empty()) throw ValidationError("batch has no rollouts");
  BatchMetrics m;
  m.scenario_id = batch.scenario_id;
  m.num_rollouts = batch.rollouts.size();

  std::size_t collided = 0;
  std::size_t adv_runs = 0;
  std::size_t adv_trials = 0;
  std::size_t wp_runs = 0;
  std::size_t wp_trials = 0;
  for (const Rollout& r : batch.rollouts) {
    collided += rollout_has_collision(r, threshold, mode) ? 1 : 0;
    if (r.diagnostics.adv) {
      ++adv_runs;
      adv_trials += r.diagnostics.adv->trials;
    }
    if (r.diagnostics.world_p) {
      ++wp_runs;
      wp_trials += r.diagnostics.world_p->trials;
    }
  }
  m.residual_collision_rate = static_cast<double>(collided) / static_cast<double>(m.num_rollouts);
  if (adv_runs > 0) m.mean_trials_adv = static_cast<double>(adv_trials) / static_cast<double>(adv_runs);
  if (wp_runs > 0) m.mean_trials_world_p = static_cast<double>(wp_trials) / static_cast<double>(wp_runs);

  std::vector<const Rollout*> distinct;
  for (const Rollout& r : batch.rollouts) {
    const bool seen = std::any_of(distinct.begin(), distinct.end(),
                                  [&](const Rollout* d) { return d->agents == r.agents; });
    if (!seen) distinct.push_back(&r);
  }
  m.distinct_rollout_count = distinct.size();

  if (truth != nullptr) m.min_ade = compute_min_ade(batch, *truth, options);
  return m;
}

inline json_io::OrderedJson metrics_to_json(const BatchMetrics& m) {
  json_io::OrderedJson j;
  j["scenario_id"] = m.scenario_id;
  j["num_rollouts"] = m.num_rollouts;
  j["min_ade"] = m.min_ade ? json_io::OrderedJson(*m.min_ade) : json_io::OrderedJson(nullptr);
  j["residual_collision_rate"] = m.residual_collision_rate;
  j["mean_trials_adv"] = m.mean_trials_adv;
  j["mean_trials_world_p"] = m.mean_trials_world_p;
  j["distinct_rollout_count"] = m.distinct_rollout_count;
  return j;
}

inline constexpr std::string_view kMetricsCsvHeader =
    "scenario_id,num_rollouts,min_ade,residual_collision_rate,mean_trials_adv,"
    "mean_trials_world_p,distinct_rollout_count";

/// Header plus one row per scenario; min_ade is left empty when unavailable.
inline std::string metrics_to_csv(const std::vector<BatchMetrics>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << kMetricsCsvHeader << '\n';
  for (const BatchMetrics& m : rows) {
    out << m.scenario_id << ',' << m.num_rollouts << ',';
    if (m.min_ade) out << *m.min_ade;
    out << ',' << m.residual_collision_rate << ',' << m.mean_trials_adv << ','
        << m.mean_trials_world_p << ',' << m.distinct_rollout_count << '\n';
  }
  return out.str();
}

}  // namespace cadsim
