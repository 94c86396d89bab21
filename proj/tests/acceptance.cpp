// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Tolerances and run counts are fixed here and must not be loosened.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>

#include "cadsim/cadsim.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace cadsim;
namespace ct = cadsim::testing;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* name, const char* title, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs >= limit_s) {
    o.pass = false;
    o.detail += "; too slow";
  }
  if (!o.pass) ++failures;
  std::printf("[%s] %s %s: %s (%.3f s%s)\n", o.pass ? "PASS" : "FAIL", name, title, o.detail.c_str(), secs,
              limit_s > 0 ? (", limit " + std::to_string(static_cast<int>(limit_s)) + " s").c_str() : "");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool bit_equal(const PoseTrajectory& a, const PoseTrajectory& b) {
  return a.positions.size() == b.positions.size() && a.headings.size() == b.headings.size() &&
         std::memcmp(a.positions.data(), b.positions.data(), a.positions.size() * sizeof(Vec3)) == 0 &&
         std::memcmp(a.headings.data(), b.headings.data(), a.headings.size() * sizeof(double)) == 0;
}

// Shared by AC1 and AC2.
constexpr std::size_t kCadRuns = 10000;
constexpr std::uint64_t kCadSeed = 20240601;

struct CadRuns {
  double exact_free = 0.0;
  std::size_t free = 0;
  std::vector<std::size_t> trials_hist;
};

CadRuns run_one_in_four() {
  const DistributionMap dists = ct::one_in_four_fixture();
  CadConfig cfg;
  CadRuns out;
  out.exact_free = oracle::collision_free_probability(dists, cfg.collision_threshold);
  out.trials_hist.assign(cfg.max_trials, 0);
  const RandomStream master = RandomStream::from_seed(kCadSeed);
  for (std::size_t run = 0; run < kCadRuns; ++run) {
    RandomStream rng = master.derive(run);
    const CadResult r = cad_resample(dists, cfg, rng);
    out.free += r.collision_free;
    ++out.trials_hist.at(r.trials_used - 1);
  }
  return out;
}

Scenario eight_agent_fixture() { return load_scenario(ct::fixture_dir() / "scenario_8agents.json"); }

std::filesystem::path export_predictions(const Scenario& s, std::uint64_t seed, const std::string& name) {
  SyntheticConfig alt;
  alt.template_logits = {0.0, 1.0, -1.0, 0.5, 0.2, 1.2};
  alt.position_noise = 0.2;
  RandomStream rng = RandomStream::from_seed(seed);
  const auto pred = predict_synthetic_multimodal(s, partition_agents(s).adv_and_world_p(), alt, rng);
  const auto path = std::filesystem::temp_directory_path() / name;
  save_predictions(pred.per_agent, path);
  return path;
}

}  // namespace

int main() {
  CadRuns cad_runs;
  report("AC1", "CAD collision-free rate on the 1-in-4 fixture", 10.0, [&] {
    cad_runs = run_one_in_four();
    const double expected = 1.0 - std::pow(0.75, 10);
    const double empirical = static_cast<double>(cad_runs.free) / kCadRuns;
    const bool enum_ok = cad_runs.exact_free == 0.25;
    return Outcome{enum_ok && std::abs(empirical - expected) <= 0.02,
                   fmt("enumerated p=%.6f, empirical=%.4f, expected=%.4f +- 0.02, runs=%zu",
                       cad_runs.exact_free, empirical, expected, kCadRuns)};
  });

  report("AC2", "trials_used follows the truncated geometric law", 0, [&] {
    if (cad_runs.trials_hist.empty()) cad_runs = run_one_in_four();
    const auto pmf = oracle::truncated_geometric_pmf(0.25, cad_runs.trials_hist.size());
    double min_expected = kCadRuns;
    for (double p : pmf) min_expected = std::min(min_expected, p * kCadRuns);
    const double stat = oracle::chi_square(cad_runs.trials_hist, pmf, kCadRuns);
    const double df = static_cast<double>(pmf.size() - 1);
    const double critical =
        boost::math::quantile(boost::math::complement(boost::math::chi_squared(df), 0.001));
    return Outcome{stat < critical && min_expected >= 5.0,
                   fmt("chi2=%.3f, df=%.0f, critical(0.001)=%.3f, min expected count=%.1f", stat, df,
                       critical, min_expected)};
  });

  report("AC3", "detect_collision agrees with brute force", 5.0, [] {
    RandomStream rng = RandomStream::from_seed(31337);
    std::size_t mismatches = 0, collisions = 0, checks = 0;
    for (int i = 0; i < 1000; ++i) {
      const std::size_t n = 1 + rng() % 10;
      const std::size_t horizon = 1 + rng() % 20;
      const double extent = 0.2 + 2.0 * rng.uniform();
      const auto tracks = ct::random_tracks(rng, n, horizon, extent);
      const auto refs = make_track_refs(tracks);
      for (DistanceMode mode : {DistanceMode::k3d, DistanceMode::kXy}) {
        const bool truth = oracle::brute_force_collision(tracks, 0.1, mode == DistanceMode::k3d);
        collisions += truth;
        for (bool hashed : {false, true}) {
          mismatches += detect_collision(refs, 0.1, mode, hashed).collision != truth;
          ++checks;
        }
        mismatches += detect_collision_scan(refs, 0.1, mode).collision != truth;
        mismatches += detect_collision_grid(refs, 0.1, mode).collision != truth;
        checks += 2;
      }
    }
    return Outcome{mismatches == 0, fmt("instances=1000, checks=%zu, mismatches=%zu, colliding (instance, mode) pairs=%zu",
                                        checks, mismatches, collisions)};
  });

  report("AC4", "group independence under predictor swaps", 0, [] {
    const Scenario s = eight_agent_fixture();
    const Partition p = partition_agents(s);
    if (!p.adv || p.world_p.empty()) return Outcome{false, "fixture lacks ADV or World-p agents"};
    const auto file_a = export_predictions(s, 1, "cadsim_acceptance_a.json");
    const auto file_b = export_predictions(s, 2, "cadsim_acceptance_b.json");
    RolloutConfig base;
    base.master_seed = 4;
    RolloutConfig wp_file = base;
    wp_file.predictors.world_p = "file:" + file_a.string();
    RolloutConfig adv_file = base;
    adv_file.predictors.adv = "file:" + file_b.string();

    const RolloutBatch ref = simulate_batch(s, base);
    const RolloutBatch swapped_wp = simulate_batch(s, wp_file);
    const RolloutBatch swapped_adv = simulate_batch(s, adv_file);
    std::filesystem::remove(file_a);
    std::filesystem::remove(file_b);

    std::size_t adv_diff = 0, wp_diff = 0, wp_changed = 0, adv_changed = 0;
    for (std::size_t i = 0; i < ref.rollouts.size(); ++i) {
      const auto& a = ref.rollouts[i].agents;
      adv_diff += !bit_equal(a.at(*p.adv), swapped_wp.rollouts[i].agents.at(*p.adv));
      adv_changed += !bit_equal(a.at(*p.adv), swapped_adv.rollouts[i].agents.at(*p.adv));
      for (AgentId id : p.world_p) {
        wp_diff += !bit_equal(a.at(id), swapped_adv.rollouts[i].agents.at(id));
        wp_changed += !bit_equal(a.at(id), swapped_wp.rollouts[i].agents.at(id));
      }
    }
    // The swaps must actually change the swapped group, or the check says nothing.
    return Outcome{ref.rollouts.size() == 32 && adv_diff == 0 && wp_diff == 0 && wp_changed > 0 && adv_changed > 0,
                   fmt("rollouts=%zu, ADV diffs under World-p swap=%zu, World-p diffs under ADV swap=%zu, "
                       "swapped-group changes=%zu/%zu",
                       ref.rollouts.size(), adv_diff, wp_diff, wp_changed, adv_changed)};
  });

  report("AC5", "constant-velocity noise scale and zero-noise exactness", 0, [] {
    constexpr std::size_t kSamples = 100000;
    const Scenario s = ct::scenario({ct::agent(1, ct::state(3.0, -2.0, 1.5, 0.5))}, kSamples, 0.1);
    RandomStream rng = RandomStream::from_seed(5);
    const auto noisy = predict_constant_velocity(s, {1}, 0.01, rng).per_agent.at(1).modes[0];
    const AgentState& c = s.agent(1).current();
    double sd[3];
    for (int axis = 0; axis < 3; ++axis) {
      double sum = 0, sq = 0;
      for (std::size_t t = 1; t <= kSamples; ++t) {
        const double tau = static_cast<double>(t) * s.dt;
        const Vec3& v = noisy[t - 1];
        const double e = axis == 0 ? v.x - (c.x + c.vx * tau) : axis == 1 ? v.y - (c.y + c.vy * tau) : v.z - c.z;
        sum += e;
        sq += e * e;
      }
      const double mean = sum / kSamples;
      sd[axis] = std::sqrt((sq - kSamples * mean * mean) / (kSamples - 1));
    }
    bool sd_ok = true;
    for (double v : sd) sd_ok = sd_ok && v >= 0.0095 && v <= 0.0105;

    RandomStream rng0 = RandomStream::from_seed(6);
    const auto exact = predict_constant_velocity(s, {1}, 0.0, rng0).per_agent.at(1).modes[0];
    std::size_t off = 0;
    for (std::size_t t = 1; t <= kSamples; ++t) {
      const double tau = static_cast<double>(t) * s.dt;
      const Vec3 want{c.x + c.vx * tau, c.y + c.vy * tau, c.z};
      off += !(exact[t - 1] == want);
    }
    return Outcome{sd_ok && off == 0, fmt("std x/y/z = %.6f/%.6f/%.6f in [0.0095, 0.0105]; k=0 mismatches=%zu",
                                          sd[0], sd[1], sd[2], off)};
  });

  report("AC6", "heading estimation", 0, [] {
    std::vector<std::string> bad;
    std::vector<Vec3> straight, diag;
    for (int i = 1; i <= 10; ++i) {
      straight.push_back({0.7 * i, 2.0, 0});
      diag.push_back({1.0 * i, 1.0 * i, 0});
    }
    for (double h : estimate_headings(straight, {0, 2.0, 0}, 1.2)) if (h != 0.0) bad.push_back("straight");
    for (double h : estimate_headings(diag, {0, 0, 0}, 0.0)) if (std::abs(h - kPi / 4) > 1e-12) bad.push_back("45deg");
    const std::vector<Vec3> still(10, Vec3{4, 4, 0});
    for (double h : estimate_headings(still, {4, 4, 0}, -2.5)) if (h != -2.5) bad.push_back("stationary");

    RandomStream rng = RandomStream::from_seed(66);
    double worst = 0.0;
    for (int iter = 0; iter < 1000; ++iter) {
      std::vector<Vec3> p, rp;
      Vec3 cur{10 * rng.uniform(), 10 * rng.uniform(), 0};
      const Vec3 start = cur;
      const double theta = 2 * kPi * rng.uniform();
      const auto rot = [&](const Vec3& v) {
        return Vec3{std::cos(theta) * v.x - std::sin(theta) * v.y, std::sin(theta) * v.x + std::cos(theta) * v.y, v.z};
      };
      for (int i = 0; i < 20; ++i) {
        const double len = 0.1 + 1.4 * rng.uniform();
        const double dir = 2 * kPi * rng.uniform();
        cur = cur + Vec3{len * std::cos(dir), len * std::sin(dir), 0};
        p.push_back(cur);
        rp.push_back(rot(cur));
      }
      const double h0 = kPi * (1 - 2 * rng.uniform());
      const auto h = estimate_headings(p, start, h0);
      const auto hr = estimate_headings(rp, rot(start), h0 + theta);
      for (std::size_t i = 0; i < h.size(); ++i) {
        worst = std::max(worst, std::abs(std::remainder(hr[i] - h[i] - theta, 2 * kPi)));
      }
    }
    if (worst > 1e-12) bad.push_back("rotation");
    std::string which;
    for (const auto& b : bad) which += " " + b;
    return Outcome{bad.empty(), fmt("straight=0, 45deg=pi/4, stationary carries h0, rotation max err=%.2e over 1000%s",
                                    worst, bad.empty() ? "" : ("; failing:" + which).c_str())};
  });

  report("AC7", "8-agent fixture batch shape and determinism", 30.0, [] {
    const Scenario s = eight_agent_fixture();
    const Partition p = partition_agents(s);
    RolloutConfig cfg;
    const auto dir = std::filesystem::temp_directory_path();
    save_batch(simulate_batch(s, cfg), dir / "cadsim_acceptance_run1.json");
    save_batch(simulate_batch(s, cfg), dir / "cadsim_acceptance_run2.json");
    const std::string a = json_io::read_text_file(dir / "cadsim_acceptance_run1.json");
    const std::string b = json_io::read_text_file(dir / "cadsim_acceptance_run2.json");
    const RolloutBatch batch = load_batch(dir / "cadsim_acceptance_run1.json");
    std::filesystem::remove(dir / "cadsim_acceptance_run1.json");
    std::filesystem::remove(dir / "cadsim_acceptance_run2.json");
    bool shape = batch.rollouts.size() == 32;
    for (const Rollout& r : batch.rollouts) {
      shape = shape && r.agents.size() == p.all().size();
      for (AgentId id : p.all()) {
        const auto it = r.agents.find(id);
        shape = shape && it != r.agents.end() && it->second.positions.size() == s.horizon &&
                it->second.headings.size() == s.horizon;
      }
    }
    return Outcome{shape && a == b && !a.empty(),
                   fmt("rollouts=%zu, agents=%zu, T=%zu, shape %s, files %s (%zu bytes)", batch.rollouts.size(),
                       p.all().size(), s.horizon, shape ? "ok" : "WRONG", a == b ? "identical" : "DIFFER",
                       a.size())};
  });

  report("AC8", "minADE values and monotonicity", 0, [] {
    const auto pose = [](std::vector<Vec3> pts) {
      PoseTrajectory pt;
      pt.headings.assign(pts.size(), 0.0);
      pt.positions = std::move(pts);
      return pt;
    };
    const auto track = [](const std::vector<Vec3>& pts) {
      std::vector<AgentState> out;
      for (const Vec3& v : pts) out.push_back(ct::state(v.x, v.y));
      return out;
    };
    RolloutBatch b;
    b.partition.world_o = {1};
    b.rollouts.push_back({{{1, pose(std::vector<Vec3>(5, Vec3{3, 4, 0}))}}, {}});
    const double ade = compute_min_ade(b, {{1, track(std::vector<Vec3>(5, Vec3{0, 0, 0}))}});

    RandomStream rng = RandomStream::from_seed(808);
    std::size_t violations = 0;
    for (int iter = 0; iter < 200; ++iter) {
      const std::size_t n_agents = 1 + rng() % 5;
      const std::size_t horizon = 1 + rng() % 10;
      RolloutBatch batch;
      GroundTruthFuture truth;
      const auto random_pts = [&] {
        std::vector<Vec3> pts;
        for (std::size_t t = 0; t < horizon; ++t) pts.push_back({20 * rng.uniform(), 20 * rng.uniform(), 0});
        return pts;
      };
      for (std::size_t a = 0; a < n_agents; ++a) {
        batch.partition.world_o.insert(static_cast<AgentId>(a));
        truth[static_cast<AgentId>(a)] = track(random_pts());
      }
      double prev = INFINITY;
      for (int k = 0; k < 8; ++k) {
        Rollout r;
        for (std::size_t a = 0; a < n_agents; ++a) r.agents[static_cast<AgentId>(a)] = pose(random_pts());
        batch.rollouts.push_back(std::move(r));
        const double cur = compute_min_ade(batch, truth);
        violations += cur > prev;
        prev = cur;
      }
    }
    return Outcome{ade == 5.0 && violations == 0,
                   fmt("3-4-5 minADE=%.17g (expected 5.0 exactly); monotonicity violations=%zu over 200 batches",
                       ade, violations)};
  });

  std::printf("%s: %d of 8 criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
