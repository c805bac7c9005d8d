// Acceptance gates for the frontier pipeline: ten independent checks, one
// printed line each, exit code = number of failures. Tolerances are pinned
// here and must not be loosened to make a gate pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "helpers.hpp"
#include "perseus/serde.hpp"

using namespace perseus;
namespace fs = std::filesystem;

namespace {

struct Workload {
  NodeDag dag;
  CostModel model;
  Quanta tau = 0;
  Frontier frontier;
};

// Every frontier characterized anywhere in this suite lands here so the
// cross-cutting gates (step grid, savings, energy identity) see all of them.
std::vector<Workload> registry;

struct Outcome {
  bool pass = false;
  std::string detail;
};

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return std::string(buf);
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Fixed four-point profile on consecutive tau multiples with energies on an
// exponential-in-time curve; identical for every class that uses it.
FrequencyProfile fixed_profile(ClassKey key, Quanta tau) {
  static const int kFreqs[] = {1400, 1200, 1000, 800};
  FrequencyProfile p;
  p.key = key;
  for (int j = 0; j < 4; ++j)
    p.points.push_back(ProfilePoint{
        kFreqs[j], (4 + j) * tau,
        static_cast<Millijoules>(std::llround(3000.0 + 16000.0 * std::pow(1.5, -j)))});
  return p;
}

// Eight operating points per class for the scale gate.
FrequencyProfile wide_profile(ClassKey key, Quanta tau) {
  static const int kFreqs[] = {1400, 1320, 1240, 1160, 1080, 1000, 920, 840};
  FrequencyProfile p;
  p.key = key;
  for (int j = 0; j < 8; ++j)
    p.points.push_back(ProfilePoint{
        kFreqs[j], (4 + j) * tau,
        static_cast<Millijoules>(std::llround(3000.0 + 24000.0 * std::pow(1.25, -j)))});
  return p;
}

// ── 1: every frontier point within 2% of the exhaustive optimum ─────────────

Outcome oracle_closeness() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 rng(20260814u);
  std::uniform_int_distribution<int> stages_dist(1, 3), micro_dist(1, 3);
  const Quanta tau = 1000;
  int points = 0, violations = 0;
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    const int stages = stages_dist(rng), micro = micro_dist(rng);
    const int comps = 2 * stages * micro;
    const int max_points = comps <= 8 ? 4 : comps <= 12 ? 3 : 2;  // keeps enumeration tractable
    const ProfileSet set = testutil::grid_profiles(rng, stages, tau, max_points, true);
    NodeDag dag = build_1f1b(stages, micro);
    CostModel model = CostModel::build(set, kDefaultQuantumUs);
    Frontier frontier = discover_frontier(dag, model, tau);
    const ExactFrontier exact = brute_force_frontier(dag, model);
    for (const auto& s : frontier.schedules) {
      const ExactPoint* opt = exact.optimum_at(s.t_realized);
      if (!opt) {
        ++violations;
        continue;
      }
      const double gap = testutil::relative_gap(s.eff_realized_mj, opt->eff_energy_mj);
      worst = std::max(worst, gap);
      if (gap > 0.02 || gap < -1e-9) ++violations;
      ++points;
    }
    const GapReport gaps = gap_report(exact, frontier);
    worst = std::max(worst, gaps.max_gap);
    if (gaps.max_gap > 0.02) ++violations;
    registry.push_back({std::move(dag), std::move(model), tau, std::move(frontier)});
  }
  const double wall = elapsed_s(t0);
  return {violations == 0 && wall < 300.0,
          fmt("200 instances, %d frontier points, worst gap %.4f%%, %.1fs", points, worst * 100.0,
              wall)};
}

// ── 2: planned times descend in exact tau steps (final step clipped) ────────

Outcome step_exactness() {
  int pairs = 0, off_grid = 0, stopped_early = 0;
  for (const auto& w : registry) {
    const auto& s = w.frontier.schedules;
    for (size_t i = 0; i + 1 < s.size(); ++i) {
      const Quanta expected = std::min<Quanta>(w.tau, s[i].t_planned - w.frontier.t_min);
      if (s[i].t_planned - s[i + 1].t_planned != expected) ++off_grid;
      ++pairs;
    }
    if (s.back().t_planned != w.frontier.t_min) ++stopped_early;
  }
  return {off_grid == 0 && stopped_early == 0,
          fmt("%d runs, %d consecutive pairs, %d off-grid, %d stopped early",
              static_cast<int>(registry.size()), pairs, off_grid, stopped_early)};
}

// ── 3: bounded max-flow against exhaustive cuts and feasibility ─────────────

Outcome flow_against_bruteforce() {
  std::mt19937 rng(424242u);
  int feasible = 0, infeasible = 0, mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const FlowGraph g = testutil::random_flow_graph(rng, 12, 30);
    const auto flow = max_flow_lower_bounds(g);
    if (flow.has_value() != testutil::feasible_bruteforce(g)) {
      ++mismatches;
      continue;
    }
    if (!flow) {
      ++infeasible;
      continue;
    }
    ++feasible;
    if (!testutil::assignment_valid(g, *flow)) ++mismatches;
    if (flow->value != testutil::min_cut_bruteforce(g)) ++mismatches;
  }
  return {mismatches == 0, fmt("1000 graphs (%d feasible, %d infeasible), %d mismatches",
                               feasible, infeasible, mismatches)};
}

// ── 4: step count grows linearly with stages + microbatches ─────────────────

Outcome step_count_scaling() {
  const Quanta tau = 1000;
  std::vector<double> xs, ys;
  for (const int stages : {2, 4, 8})
    for (const int micro : {4, 8, 16}) {
      ProfileSet set;
      set.p_blocking_watts = kDefaultBlockingWatts;
      for (int s = 0; s < stages; ++s) {
        set.profiles.push_back(fixed_profile(ClassKey{s, Kind::Forward}, tau));
        set.profiles.push_back(fixed_profile(ClassKey{s, Kind::Backward}, tau));
      }
      NodeDag dag = build_1f1b(stages, micro);
      CostModel model = CostModel::build(set, kDefaultQuantumUs);
      Frontier frontier = discover_frontier(dag, model, tau);
      xs.push_back(static_cast<double>(stages + micro));
      ys.push_back(static_cast<double>(frontier.steps));
      registry.push_back({std::move(dag), std::move(model), tau, std::move(frontier)});
    }
  const int n = static_cast<int>(xs.size());
  double sx = 0, sy = 0;
  for (int i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxy / sxx, intercept = my - slope * mx;
  double ss_res = 0, ss_tot = 0;
  for (int i = 0; i < n; ++i) {
    const double fit = intercept + slope * xs[i];
    ss_res += (ys[i] - fit) * (ys[i] - fit);
    ss_tot += (ys[i] - my) * (ys[i] - my);
  }
  const double r2 = 1.0 - ss_res / ss_tot;
  return {r2 >= 0.95, fmt("9 pipelines, steps = %.2f + %.2f*(N+M), R^2 = %.4f", intercept, slope,
                          r2)};
}

// ── 5: straggler savings ramp up to T*, then hold with shrinking percentage ─

Outcome savings_sweep() {
  int workloads = 0, degenerate = 0, violations = 0;
  for (const auto& w : registry) {
    const Quanta t_min = w.frontier.t_min, t_star = w.frontier.t_star;
    std::vector<double> factors;
    const double f_star = static_cast<double>(t_star) / static_cast<double>(t_min);
    for (double f = 1.0; f <= f_star * 1.25 + 0.1001; f += 0.05) factors.push_back(f);
    ClusterScenario scenario;
    scenario.pipelines = 4;
    const auto rows = straggler_savings(w.frontier, w.dag, w.model, scenario, factors);
    ++workloads;
    const bool flat = t_star == t_min;
    if (flat) ++degenerate;
    for (size_t i = 0; i + 1 < rows.size(); ++i) {
      if (rows[i + 1].savings_mj + 1e-6 < rows[i].savings_mj) ++violations;
      const Quanta tp = std::llround(rows[i].factor * static_cast<double>(t_min));
      if (tp < t_star) continue;
      if (std::abs(rows[i + 1].savings_mj - rows[i].savings_mj) > 0.01) ++violations;
      if (flat) {
        if (std::abs(rows[i + 1].savings_pct - rows[i].savings_pct) > 1e-9) ++violations;
      } else if (!(rows[i + 1].savings_pct < rows[i].savings_pct)) {
        ++violations;
      }
    }
  }
  return {violations == 0, fmt("%d workloads (%d with a single-point frontier), %d violations",
                               workloads, degenerate, violations)};
}

// ── 6: no uniform-frequency baseline dominates a frontier point ─────────────

Outcome baseline_domination() {
  std::mt19937 rng(90210u);
  std::uniform_int_distribution<int> stages_dist(2, 6), micro_dist(2, 8);
  const Quanta tau = 1000;
  int compared = 0, violations = 0;
  for (int i = 0; i < 20; ++i) {
    const int stages = stages_dist(rng), micro = micro_dist(rng);
    const ProfileSet set = testutil::grid_profiles(rng, stages, tau, 4, false);
    NodeDag dag = build_1f1b(stages, micro);
    CostModel model = CostModel::build(set, kDefaultQuantumUs);
    Frontier frontier = discover_frontier(dag, model, tau);
    std::vector<BaselinePoint> baseline = baseline_zeus_global(dag, model);
    const BaselineSchedule per_stage = baseline_zeus_per_stage(dag, model);
    baseline.push_back(BaselinePoint{0, per_stage.iteration_time, per_stage.eff_energy_mj});
    for (const auto& b : baseline)
      for (const auto& f : frontier.schedules) {
        ++compared;
        if (b.iteration_time <= f.t_realized && b.eff_energy_mj < f.eff_realized_mj - 1e-6)
          ++violations;
      }
    registry.push_back({std::move(dag), std::move(model), tau, std::move(frontier)});
  }
  return {violations == 0,
          fmt("20 pipelines, %d baseline-vs-frontier comparisons, %d dominated", compared,
              violations)};
}

// ── 7: three-part and effective energy decompositions agree ─────────────────

Outcome energy_identity() {
  int checked = 0, violations = 0;
  double worst = 0;
  for (const auto& w : registry)
    for (const auto& s : w.frontier.schedules) {
      const int n = static_cast<int>(w.dag.computations.size());
      const Timeline tl = simulate(w.dag, s.realized_t);
      for (const double factor : {1.0, 1.3}) {
        const Quanta t_prime = std::llround(factor * static_cast<double>(tl.iteration_time));
        ++checked;
        try {
          const EnergyReport rep = energy_report(w.dag, tl, s.realized_e, w.model.blocking,
                                                 t_prime, w.model.quantum_us);
          const double diff = std::abs(rep.total_mj - rep.effective_total_mj);
          worst = std::max(worst, diff / n);
          if (diff > 1.0 * n) ++violations;
        } catch (const std::logic_error&) {
          ++violations;
        }
      }
    }
  return {violations == 0,
          fmt("%d reports, worst disagreement %.4f mJ per computation, %d over 1 mJ", checked,
              worst, violations)};
}

// ── 8: a 500-step frontier in under a minute, sub-millisecond lookups ───────

Outcome scale_and_latency() {
  const Quanta tau = 1000;
  ProfileSet set;
  set.p_blocking_watts = kDefaultBlockingWatts;
  for (int s = 0; s < 4; ++s) {
    set.profiles.push_back(wide_profile(ClassKey{s, Kind::Forward}, tau));
    set.profiles.push_back(wide_profile(ClassKey{s, Kind::Backward}, tau));
  }
  NodeDag dag = build_1f1b(4, 8);
  CostModel model = CostModel::build(set, kDefaultQuantumUs);
  const auto t0 = std::chrono::steady_clock::now();
  Frontier frontier = discover_frontier(dag, model, tau);
  const double wall = elapsed_s(t0);
  const int steps = frontier.steps;

  std::vector<double> micros;
  std::size_t bytes = 0;
  const Quanta hi = frontier.t_star + frontier.t_star / 5;
  for (int q = 0; q <= 100; ++q) {
    const Quanta target = hi * q / 100;
    const auto a = std::chrono::steady_clock::now();
    const EnergySchedule& s = lookup(frontier, target);
    bytes += schedule_json(s, kDefaultQuantumUs).dump().size();
    micros.push_back(
        std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - a).count());
  }
  std::nth_element(micros.begin(), micros.begin() + micros.size() / 2, micros.end());
  const double median_us = micros[micros.size() / 2];
  registry.push_back({std::move(dag), std::move(model), tau, std::move(frontier)});
  return {wall < 60.0 && steps <= 500 && median_us < 1000.0,
          fmt("%d steps in %.2fs, median lookup+serialize %.1f us (%zu bytes served)", steps, wall,
              median_us, bytes)};
}

// ── 9: optimize runs are byte-for-byte reproducible ─────────────────────────

Outcome deterministic_artifacts() {
  std::mt19937 rng(777001u);
  const ProfileSet set = testutil::grid_profiles(rng, 2, 1000, 4, false);
  const fs::path dir = fs::temp_directory_path() / "perseus_acceptance_cli";
  std::error_code ec;
  fs::remove_all(dir, ec);
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");
  detail::write_text(dir / "profiles.json", profile_set_json(set).dump(2) + "\n");
  const auto run = [&](const char* out) {
    const std::string cmd = std::string(PERSEUS_CLI_PATH) + " optimize --dag 1f1b:2x4" +
                            " --profiles " + (dir / "profiles.json").string() + " --tau-us 1000" +
                            " --out " + (dir / out).string() + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
  };
  if (run("a") != 0 || run("b") != 0) return {false, "optimize exited non-zero"};
  int files = 0, differing = 0;
  const auto compare = [&](const fs::path& rel) {
    ++files;
    if (detail::read_text(dir / "a" / rel) != detail::read_text(dir / "b" / rel)) ++differing;
  };
  compare("frontier.csv");
  compare("manifest.json");
  const OptimizeManifest manifest = load_manifest(dir / "a");
  for (int k = 0; k < manifest.num_schedules; ++k)
    compare(fs::path("schedules") / ("schedule_" + std::to_string(k) + ".json"));
  fs::remove_all(dir, ec);
  return {files >= 3 && differing == 0, fmt("%d artifacts byte-compared, %d differ", files,
                                            differing)};
}

// ── 10: stage partitioning matches exhaustive search ────────────────────────

PartitionResult partition_oracle(const std::vector<Quanta>& latencies, int stages) {
  const int layers = static_cast<int>(latencies.size());
  std::vector<Quanta> prefix(layers + 1, 0);
  for (int i = 0; i < layers; ++i) prefix[i + 1] = prefix[i] + latencies[i];
  std::vector<int> cur(stages + 1, 0);
  cur[stages] = layers;
  std::vector<int> best;
  Quanta best_hi = 0, best_lo = 1;
  bool have = false;
  const auto consider = [&] {
    Quanta hi = 0, lo = std::numeric_limits<Quanta>::max();
    for (int s = 0; s < stages; ++s) {
      const Quanta sum = prefix[cur[s + 1]] - prefix[cur[s]];
      hi = std::max(hi, sum);
      lo = std::min(lo, sum);
    }
    if (!have || static_cast<__int128>(hi) * best_lo < static_cast<__int128>(best_hi) * lo) {
      have = true;
      best_hi = hi;
      best_lo = lo;
      best.assign(cur.begin(), cur.end());
    }
  };
  const auto recurse = [&](auto&& self, int s) -> void {
    if (s == stages) {
      consider();
      return;
    }
    for (int next = cur[s - 1] + 1; next <= layers - (stages - s); ++next) {
      cur[s] = next;
      self(self, s + 1);
    }
  };
  if (stages == 1)
    consider();
  else
    recurse(recurse, 1);
  PartitionResult r;
  r.boundaries = best;
  r.ratio = static_cast<double>(best_hi) / static_cast<double>(best_lo);
  return r;
}

Outcome partition_balance() {
  std::mt19937 rng(771177u);
  std::uniform_int_distribution<int> layers_dist(3, 14), lat_dist(1, 50);
  int mismatches = 0, imperfect = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int layers = layers_dist(rng);
    const int stages = 1 + static_cast<int>(rng() % static_cast<unsigned>(std::min(4, layers)));
    std::vector<Quanta> latencies(layers);
    for (auto& v : latencies) v = lat_dist(rng);
    const PartitionResult got = min_imbalance_partition(latencies, stages);
    const PartitionResult want = partition_oracle(latencies, stages);
    if (got.boundaries != want.boundaries || std::abs(got.ratio - want.ratio) > 1e-12)
      ++mismatches;
  }
  // Layer groups engineered so every stage sums to the same total.
  for (int trial = 0; trial < 20; ++trial) {
    const int stages = 2 + static_cast<int>(rng() % 3);
    const Quanta target = 10 + static_cast<Quanta>(rng() % 31);
    std::vector<Quanta> latencies;
    for (int s = 0; s < stages; ++s) {
      int parts = 1 + static_cast<int>(rng() % 4);
      Quanta left = target;
      for (; parts > 1; --parts) {
        const Quanta v = 1 + static_cast<Quanta>(rng() % (left - parts + 1));
        latencies.push_back(v);
        left -= v;
      }
      latencies.push_back(left);
    }
    const PartitionResult got = min_imbalance_partition(latencies, stages);
    if (got.ratio != 1.0) ++imperfect;
    const PartitionResult want = partition_oracle(latencies, stages);
    if (got.boundaries != want.boundaries) ++mismatches;
  }
  return {mismatches == 0 && imperfect == 0,
          fmt("300 random + 20 balanced instances, %d mismatches, %d missed perfect splits",
              mismatches, imperfect)};
}

}  // namespace

int main() {
  Outcome results[10];
  results[0] = oracle_closeness();      // fills the registry
  results[3] = step_count_scaling();    // fills the registry
  results[5] = baseline_domination();   // fills the registry
  results[7] = scale_and_latency();     // fills the registry
  results[1] = step_exactness();        // sweeps the registry
  results[4] = savings_sweep();         // sweeps the registry
  results[6] = energy_identity();       // sweeps the registry
  results[2] = flow_against_bruteforce();
  results[8] = deterministic_artifacts();
  results[9] = partition_balance();

  static const char* kNames[10] = {
      "oracle closeness",   "step exactness",    "min-cut vs brute force",
      "step-count scaling", "straggler savings", "baseline domination",
      "energy identity",    "scale and latency", "deterministic artifacts",
      "partition balance"};
  int failures = 0;
  for (int i = 0; i < 10; ++i) {
    std::printf("criterion %d (%s): %s - %s\n", i + 1, kNames[i],
                results[i].pass ? "PASS" : "FAIL", results[i].detail.c_str());
    if (!results[i].pass) ++failures;
  }
  return failures;
}
