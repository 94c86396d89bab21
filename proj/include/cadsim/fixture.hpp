#pragma once

// Deterministic synthetic scenarios for tests, demos and the `fixture` command.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "cadsim/metrics.hpp"
#include "cadsim/rng.hpp"
#include "cadsim/scenario.hpp"

namespace cadsim {

struct FixtureOptions {
  std::size_t num_agents = 8;
  std::uint64_t seed = 0;
  std::size_t history_len = 11;  // 1.1 s at 10 Hz
  std::size_t horizon = 80;      // 8 s at 10 Hz
  double dt = 0.1;
};

/**
 * Agents 0..N-1 on four parallel lanes 4 m apart; lanes 0-1 drive toward +x,
 * lanes 2-3 toward -x. Agent 0 is the ADV, odd ids are tracks_to_predict and
 * the remaining even ids are World-o. Every history state is valid and
 * consistent with the agent's constant velocity.
 */
inline Scenario make_fixture_scenario(const FixtureOptions& opt) {
  RandomStream rng = RandomStream::from_seed(opt.seed).derive(0xF1);
  Scenario s;
  s.scenario_id = "fixture-" + std::to_string(opt.num_agents) + "-" + std::to_string(opt.seed);
  s.history_len = opt.history_len;
  s.horizon = opt.horizon;
  s.dt = opt.dt;
  for (std::size_t i = 0; i < opt.num_agents; ++i) {
    Agent a;
    a.id = static_cast<AgentId>(i);
    a.is_adv = i == 0;
    a.tracks_to_predict = i % 2 == 1;
    const std::size_t lane = i % 4;
    const bool forward = lane < 2;
    const double y = 4.0 * static_cast<double>(lane);
    const double x = 30.0 * static_cast<double>(i / 4) + 5.0 * rng.uniform();
    double speed = 0.0;
    if (i % 5 == 4) {
      a.kind = AgentKind::kPedestrian;
      a.length = 0.8;
      a.width = 0.8;
      a.height = 1.8;
      speed = 0.5 + 1.0 * rng.uniform();
    } else if (i % 7 == 6) {
      a.kind = AgentKind::kCyclist;
      a.length = 1.8;
      a.width = 0.7;
      a.height = 1.6;
      speed = 3.0 + 3.0 * rng.uniform();
    } else {
      a.kind = AgentKind::kVehicle;
      a.length = 4.5;
      a.width = 2.0;
      a.height = 1.6;
      speed = 5.0 + 10.0 * rng.uniform();
    }
    const double heading = forward ? 0.0 : std::numbers::pi;
    const double vx = forward ? speed : -speed;
    for (std::size_t k = 0; k < opt.history_len; ++k) {
      const double back = static_cast<double>(opt.history_len - 1 - k) * opt.dt;
      AgentState st;
      st.x = x - vx * back;
      st.y = y;
      st.z = 0.0;
      st.heading = heading;
      st.vx = vx;
      st.vy = 0.0;
      st.valid = true;
      a.past.push_back(st);
    }
    s.agents.push_back(std::move(a));
  }
  validate(s);
  return s;
}

/// Plausible observed futures: constant velocity plus a slow lateral weave.
inline GroundTruthFuture make_fixture_truth(const Scenario& s, std::uint64_t seed) {
  RandomStream rng = RandomStream::from_seed(seed).derive(0x7E);
  GroundTruthFuture truth;
  for (const Agent& a : s.agents) {
    if (!a.valid_now()) continue;
    const AgentState& c = a.current();
    const double amplitude = 0.5 * rng.uniform();
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    std::vector<AgentState> fut;
    for (std::size_t t = 1; t <= s.horizon; ++t) {
      const double tau = static_cast<double>(t) * s.dt;
      AgentState st;
      st.x = c.x + c.vx * tau;
      st.y = c.y + c.vy * tau + amplitude * std::sin(0.5 * tau + phase) - amplitude * std::sin(phase);
      st.z = c.z;
      st.heading = c.heading;
      st.vx = c.vx;
      st.vy = c.vy;
      st.valid = true;
      fut.push_back(st);
    }
    truth.emplace(a.id, std::move(fut));
  }
  return truth;
}

}  // namespace cadsim
