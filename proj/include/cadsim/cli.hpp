#pragma once

// `cadsim` command line: validate, fixture, simulate, metrics.
// Exit codes: 0 success, 1 validation failure, 2 I/O, schema or usage error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cadsim/error.hpp"
#include "cadsim/fixture.hpp"
#include "cadsim/json_io.hpp"
#include "cadsim/metrics.hpp"
#include "cadsim/rollout.hpp"
#include "cadsim/scenario.hpp"

namespace cadsim::cli {

enum ExitCode : int { kOk = 0, kValidationFailure = 1, kIoOrSchemaError = 2 };

namespace detail {

inline std::string join_ids(const AgentIdSet& ids) {
  std::string out = "[";
  for (AgentId id : ids) {
    if (out.size() > 1) out += ",";
    out += std::to_string(id);
  }
  return out + "]";
}

inline void log_resolved(std::ostream& err, const std::string& command,
                         const json_io::OrderedJson& resolved) {
  err << "cadsim " << command << ": resolved " << resolved.dump() << '\n';
}

inline int validate_cmd(const std::string& path, std::ostream& out, std::ostream& err) {
  log_resolved(err, "validate", {{"scenario", path}});
  const Scenario s = load_scenario(path);
  const Partition p = partition_agents(s);
  out << "ok: scenario '" << s.scenario_id << "' agents=" << s.agents.size()
      << " history_len=" << s.history_len << " horizon=" << s.horizon << " dt=" << s.dt
      << " adv=" << (p.adv ? std::to_string(*p.adv) : "none")
      << " world_p=" << join_ids(p.world_p) << " world_o=" << join_ids(p.world_o) << '\n';
  return kOk;
}

struct FixtureArgs {
  std::size_t agents = 8;
  std::uint64_t seed = 0;
  std::string output;
  std::string truth;
  std::size_t history_len = 11;
  std::size_t horizon = 80;
  double dt = 0.1;
};

inline int fixture_cmd(const FixtureArgs& a, std::ostream& err) {
  FixtureOptions opt{a.agents, a.seed, a.history_len, a.horizon, a.dt};
  log_resolved(err, "fixture",
               {{"agents", a.agents}, {"seed", a.seed}, {"history_len", a.history_len},
                {"horizon", a.horizon}, {"dt", a.dt}, {"output", a.output},
                {"truth", a.truth.empty() ? json_io::OrderedJson(nullptr) : json_io::OrderedJson(a.truth)}});
  const Scenario s = make_fixture_scenario(opt);
  save_scenario(s, a.output);
  if (!a.truth.empty()) save_ground_truth(make_fixture_truth(s, a.seed), a.truth);
  return kOk;
}

struct SimulateArgs {
  std::string scenario;
  std::string config;
  std::string output;
  std::string dump_csv;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

inline int simulate_cmd(const SimulateArgs& a, std::ostream& err) {
  const Scenario scenario = load_scenario(a.scenario);
  RolloutConfig config;
  std::filesystem::path base_dir = ".";
  if (!a.config.empty()) {
    config = load_config(a.config);
    base_dir = std::filesystem::path(a.config).parent_path();
    if (base_dir.empty()) base_dir = ".";
  }
  if (a.seed) config.master_seed = *a.seed;
  log_resolved(err, "simulate",
               {{"scenario", a.scenario}, {"config_file", a.config}, {"output", a.output},
                {"jobs", a.jobs}, {"config", config_to_json(config)}});
  const RolloutBatch batch = simulate_batch(scenario, config, base_dir, a.jobs);
  const std::string text = serialize_batch(batch);
  // Self-check: the emitted file must load back under the batch schema.
  batch_from_json(json_io::parse(text, a.output));
  json_io::write_text_file(a.output, text);
  if (!a.dump_csv.empty()) json_io::write_text_file(a.dump_csv, batch_to_csv(batch));
  err << "cadsim simulate: wrote " << batch.rollouts.size() << " rollouts for "
      << batch.partition.all().size() << " agents to " << a.output << '\n';
  return kOk;
}

struct MetricsArgs {
  std::string batch;
  std::string truth;
  std::string output;
  std::string format;  // "json", "csv" or empty (from the output extension)
  bool scored_only = false;
};

inline int metrics_cmd(const MetricsArgs& a, std::ostream& err) {
  const RolloutBatch batch = load_batch(a.batch);
  std::string format = a.format;
  if (format.empty()) {
    format = std::filesystem::path(a.output).extension() == ".csv" ? "csv" : "json";
  }
  log_resolved(err, "metrics",
               {{"batch", a.batch}, {"truth", a.truth}, {"output", a.output}, {"format", format},
                {"scored_only", a.scored_only},
                {"collision_threshold", batch.config.cad.collision_threshold},
                {"distance_mode", std::string(to_string(batch.config.cad.distance_mode))}});
  std::optional<GroundTruthFuture> truth;
  const MinAdeOptions options{a.scored_only};
  if (!a.truth.empty()) {
    truth = load_ground_truth(a.truth);
    const auto detail = compute_min_ade_detailed(batch, *truth, options);
    for (AgentId id : detail.skipped) {
      err << "cadsim metrics: warning: agent " << id << " has no valid ground truth, skipped\n";
    }
  }
  const BatchMetrics m =
      compute_batch_metrics(batch, batch.config.cad.collision_threshold,
                            batch.config.cad.distance_mode, truth ? &*truth : nullptr, options);
  const std::string text =
      format == "csv" ? metrics_to_csv({m}) : metrics_to_json(m).dump(2) + "\n";
  json_io::write_text_file(a.output, text);
  return kOk;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Multi-agent rollout engine with collision avoidance detour resampling", "cadsim"};
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a scenario file against schema and invariants");
  validate->add_option("scenario", validate_path, "Scenario JSON file")->required();

  detail::FixtureArgs fx;
  auto* fixture = app.add_subcommand("fixture", "Write a deterministic synthetic scenario");
  fixture->add_option("--agents", fx.agents, "Number of agents")->check(CLI::PositiveNumber);
  fixture->add_option("--seed", fx.seed, "Fixture seed");
  fixture->add_option("-o,--output", fx.output, "Output scenario file")->required();
  fixture->add_option("--truth", fx.truth, "Also write a matching ground-truth future file");
  fixture->add_option("--history", fx.history_len, "History steps (>= 2)");
  fixture->add_option("--horizon", fx.horizon, "Future steps");
  fixture->add_option("--dt", fx.dt, "Seconds per step");

  detail::SimulateArgs sim;
  std::uint64_t seed_override = 0;
  auto* simulate = app.add_subcommand("simulate", "Run a rollout batch");
  simulate->add_option("--scenario", sim.scenario, "Scenario JSON file")->required();
  simulate->add_option("--config", sim.config, "Rollout config JSON file (defaults if omitted)");
  simulate->add_option("-o,--output", sim.output, "Output batch file")->required();
  auto* seed_opt = simulate->add_option("--seed", seed_override, "Override master_seed");
  simulate->add_option("--jobs", sim.jobs, "Worker threads (0 = all cores)");
  simulate->add_option("--dump-csv", sim.dump_csv, "Also write per-step positions as CSV");

  detail::MetricsArgs met;
  auto* metrics = app.add_subcommand("metrics", "Compute batch metrics");
  metrics->add_option("--batch", met.batch, "Rollout batch file")->required();
  metrics->add_option("--truth", met.truth, "Ground-truth future file (enables minADE)");
  metrics->add_option("-o,--output", met.output, "Output metrics file")->required();
  metrics->add_option("--format", met.format, "json or csv (default: from extension)")
      ->check(CLI::IsMember({"json", "csv"}));
  metrics->add_flag("--scored-only", met.scored_only, "minADE over ADV and World-p agents only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kIoOrSchemaError;
  }

  try {
    if (*validate) return detail::validate_cmd(validate_path, out, err);
    if (*fixture) return detail::fixture_cmd(fx, err);
    if (*simulate) {
      if (*seed_opt) sim.seed = seed_override;
      return detail::simulate_cmd(sim, err);
    }
    if (*metrics) return detail::metrics_cmd(met, err);
  } catch (const ValidationError& e) {
    err << "cadsim: validation error: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const SchemaError& e) {
    err << "cadsim: schema error: " << e.what() << '\n';
    return kIoOrSchemaError;
  } catch (const IoError& e) {
    err << "cadsim: I/O error: " << e.what() << '\n';
    return kIoOrSchemaError;
  } catch (const std::exception& e) {
    err << "cadsim: error: " << e.what() << '\n';
    return kIoOrSchemaError;
  }
  return kIoOrSchemaError;
}

}  // namespace cadsim::cli
