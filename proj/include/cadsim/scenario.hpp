#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "cadsim/error.hpp"
#include "cadsim/geometry.hpp"
#include "cadsim/json_io.hpp"

namespace cadsim {

using AgentId = std::int64_t;
using AgentIdSet = std::set<AgentId>;

enum class AgentKind { kVehicle, kPedestrian, kCyclist };

inline std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::kVehicle: return "vehicle";
    case AgentKind::kPedestrian: return "pedestrian";
    case AgentKind::kCyclist: return "cyclist";
  }
  return "vehicle";
}

inline std::optional<AgentKind> parse_agent_kind(std::string_view s) {
  if (s == "vehicle") return AgentKind::kVehicle;
  if (s == "pedestrian") return AgentKind::kPedestrian;
  if (s == "cyclist") return AgentKind::kCyclist;
  return std::nullopt;
}

/// The three mutually exclusive simulation groups.
enum class Group : std::uint64_t { kAdv = 1, kWorldP = 2, kWorldO = 3 };

inline std::string_view to_string(Group g) {
  switch (g) {
    case Group::kAdv: return "adv";
    case Group::kWorldP: return "world_p";
    case Group::kWorldO: return "world_o";
  }
  return "adv";
}

struct AgentState {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double heading = 0.0;  // radians, (-pi, pi]
  double vx = 0.0;
  double vy = 0.0;
  bool valid = false;

  Vec3 position() const { return {x, y, z}; }

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

struct Agent {
  AgentId id = 0;
  AgentKind kind = AgentKind::kVehicle;
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;
  bool is_adv = false;
  bool tracks_to_predict = false;
  std::vector<AgentState> past;  // oldest first; back() is the current state

  const AgentState& current() const { return past.back(); }
  bool valid_now() const { return !past.empty() && past.back().valid; }

  friend bool operator==(const Agent&, const Agent&) = default;
};

struct Scenario {
  std::string scenario_id;
  std::vector<Agent> agents;
  std::size_t history_len = 0;  // H
  std::size_t horizon = 0;      // T
  double dt = 0.0;              // seconds per step

  const Agent* find(AgentId id) const {
    const auto it = std::find_if(agents.begin(), agents.end(),
                                 [id](const Agent& a) { return a.id == id; });
    return it == agents.end() ? nullptr : &*it;
  }

  const Agent& agent(AgentId id) const {
    if (const Agent* a = find(id)) return *a;
    throw ValidationError("scenario '" + scenario_id + "' has no agent " + std::to_string(id));
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct Partition {
  std::optional<AgentId> adv;
  AgentIdSet world_p;
  AgentIdSet world_o;

  /// adv (if any) together with world_p: the agent set both learned-model groups predict over.
  AgentIdSet adv_and_world_p() const {
    AgentIdSet out = world_p;
    if (adv) out.insert(*adv);
    return out;
  }

  AgentIdSet all() const {
    AgentIdSet out = adv_and_world_p();
    out.insert(world_o.begin(), world_o.end());
    return out;
  }

  friend bool operator==(const Partition&, const Partition&) = default;
};

namespace detail {

[[noreturn]] inline void agent_violation(AgentId id, const std::string& rule) {
  throw ValidationError("agent " + std::to_string(id) + ": " + rule);
}

inline void validate_state(const AgentState& s, AgentId id, std::size_t step) {
  if (!s.valid) return;
  const std::string where = "past[" + std::to_string(step) + "] ";
  if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.z) ||
      !std::isfinite(s.vx) || !std::isfinite(s.vy)) {
    agent_violation(id, where + "has a non-finite coordinate");
  }
  if (!std::isfinite(s.heading) || s.heading <= -std::numbers::pi ||
      s.heading > std::numbers::pi) {
    agent_violation(id, where + "heading must lie in (-pi, pi]");
  }
}

}  // namespace detail

/// Throws ValidationError naming the offending agent and rule.
inline void validate(const Scenario& s) {
  if (s.history_len < 2) {
    throw ValidationError("history_len must be >= 2 (got " + std::to_string(s.history_len) + ")");
  }
  if (s.horizon < 1) throw ValidationError("horizon must be >= 1");
  if (!(s.dt > 0.0) || !std::isfinite(s.dt)) throw ValidationError("dt must be finite and > 0");

  std::unordered_set<AgentId> seen;
  std::optional<AgentId> adv;
  for (const Agent& a : s.agents) {
    if (a.id < 0) detail::agent_violation(a.id, "id must be non-negative");
    if (!seen.insert(a.id).second) {
      throw ValidationError("duplicate id " + std::to_string(a.id));
    }
    if (a.is_adv) {
      if (adv) {
        detail::agent_violation(a.id, "second is_adv agent (agent " + std::to_string(*adv) +
                                          " is already the ADV)");
      }
      adv = a.id;
    }
    for (double dim : {a.length, a.width, a.height}) {
      if (!std::isfinite(dim) || dim < 0.0) {
        detail::agent_violation(a.id, "extents must be finite and non-negative");
      }
    }
    if (a.past.size() != s.history_len) {
      detail::agent_violation(a.id, "past has " + std::to_string(a.past.size()) +
                                        " entries, expected history_len " +
                                        std::to_string(s.history_len));
    }
    for (std::size_t i = 0; i < a.past.size(); ++i) {
      detail::validate_state(a.past[i], a.id, i);
    }
  }
}

/**
 * Splits the currently-valid agents into ADV, World-p and World-o.
 *
 * is_adv wins over tracks_to_predict. Agents whose last history state is
 * invalid belong to no group.
 */
inline Partition partition_agents(const Scenario& scenario) {
  Partition p;
  for (const Agent& a : scenario.agents) {
    if (!a.valid_now()) continue;
    if (a.is_adv) {
      p.adv = a.id;
    } else if (a.tracks_to_predict) {
      p.world_p.insert(a.id);
    } else {
      p.world_o.insert(a.id);
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// JSON

inline AgentState agent_state_from_json(const json_io::Json& j, const std::string& path) {
  json_io::ObjectReader r(j, path);
  AgentState s;
  s.x = r.number("x");
  s.y = r.number("y");
  s.z = r.number("z");
  s.heading = r.number("heading");
  s.vx = r.number("vx");
  s.vy = r.number("vy");
  s.valid = r.boolean("valid");
  r.finish();
  return s;
}

inline json_io::OrderedJson agent_state_to_json(const AgentState& s) {
  json_io::OrderedJson j;
  j["x"] = s.x;
  j["y"] = s.y;
  j["z"] = s.z;
  j["heading"] = s.heading;
  j["vx"] = s.vx;
  j["vy"] = s.vy;
  j["valid"] = s.valid;
  return j;
}

inline std::vector<AgentState> agent_states_from_json(const json_io::Json& j,
                                                       const std::string& path) {
  const auto& arr = json_io::as_array(j, path);
  std::vector<AgentState> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(agent_state_from_json(arr[i], json_io::index_path(path, i)));
  }
  return out;
}

/// Schema-checks `j` (SchemaError) and then the domain invariants (ValidationError).
inline Scenario scenario_from_json(const json_io::Json& j) {
  json_io::ObjectReader root(j, "");
  Scenario s;
  s.scenario_id = root.string("scenario_id");
  const auto h = root.integer("history_len");
  const auto t = root.integer("horizon");
  if (h < 0) throw SchemaError("history_len: must be non-negative");
  if (t < 0) throw SchemaError("horizon: must be non-negative");
  s.history_len = static_cast<std::size_t>(h);
  s.horizon = static_cast<std::size_t>(t);
  s.dt = root.number("dt");
  const auto& agents = json_io::as_array(root.required("agents"), "agents");
  s.agents.reserve(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string path = json_io::index_path("agents", i);
    json_io::ObjectReader r(agents[i], path);
    Agent a;
    a.id = r.integer("id");
    const std::string kind = r.string("kind");
    const auto parsed = parse_agent_kind(kind);
    if (!parsed) {
      throw SchemaError(r.field("kind") + ": expected \"vehicle\", \"pedestrian\" or " +
                        "\"cyclist\", got \"" + kind + "\"");
    }
    a.kind = *parsed;
    a.length = r.number("length");
    a.width = r.number("width");
    a.height = r.number("height");
    a.is_adv = r.boolean("is_adv");
    a.tracks_to_predict = r.boolean("tracks_to_predict");
    a.past = agent_states_from_json(r.required("past"), r.field("past"));
    r.finish();
    s.agents.push_back(std::move(a));
  }
  root.finish();
  validate(s);
  return s;
}

inline json_io::OrderedJson scenario_to_json(const Scenario& s) {
  json_io::OrderedJson j;
  j["scenario_id"] = s.scenario_id;
  j["history_len"] = s.history_len;
  j["horizon"] = s.horizon;
  j["dt"] = s.dt;
  auto agents = json_io::OrderedJson::array();
  for (const Agent& a : s.agents) {
    json_io::OrderedJson ja;
    ja["id"] = a.id;
    ja["kind"] = std::string(to_string(a.kind));
    ja["length"] = a.length;
    ja["width"] = a.width;
    ja["height"] = a.height;
    ja["is_adv"] = a.is_adv;
    ja["tracks_to_predict"] = a.tracks_to_predict;
    auto past = json_io::OrderedJson::array();
    for (const AgentState& st : a.past) past.push_back(agent_state_to_json(st));
    ja["past"] = std::move(past);
    agents.push_back(std::move(ja));
  }
  j["agents"] = std::move(agents);
  return j;
}

inline Scenario parse_scenario(std::string_view text, std::string_view source = "<scenario>") {
  return scenario_from_json(json_io::parse(text, source));
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(json_io::parse_file(path));
}

inline void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  json_io::write_text_file(path, scenario_to_json(s).dump(2) + "\n");
}

}  // namespace cadsim
