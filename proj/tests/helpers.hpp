#pragma once

// Shared fixtures for the test suite: deterministic instance generators and
// small independent oracles (never the library's own code paths).

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "perseus/baselines.hpp"
#include "perseus/costmodel.hpp"
#include "perseus/dag.hpp"
#include "perseus/emulator.hpp"
#include "perseus/flow.hpp"
#include "perseus/frontier.hpp"
#include "perseus/oracle.hpp"

namespace testutil {

using namespace perseus;

// ---- generators ----------------------------------------------------------

// Cubic-power synthetic profile set for an N-stage pipeline: time = work/f,
// power = p_static + k f^3. work_scale perturbs stages to imbalance them.
inline ProfileSet cubic_profiles(int stages, std::vector<int> freqs, double base_work,
                                 const std::vector<double>& fwd_scale,
                                 const std::vector<double>& bwd_scale, double p_static = 80.0,
                                 double k = 1e-7) {
  ProfileSet set;
  set.p_blocking_watts = kDefaultBlockingWatts;
  for (int s = 0; s < stages; ++s) {
    set.profiles.push_back(synth_profile(base_work * fwd_scale[s], p_static, k, freqs,
                                         ClassKey{s, Kind::Forward}));
    set.profiles.push_back(synth_profile(base_work * bwd_scale[s], p_static, k, freqs,
                                         ClassKey{s, Kind::Backward}));
  }
  return set;
}

// Profile whose Pareto points sit on consecutive multiples of tau and whose
// energies lie exactly (up to mJ rounding) on c + a*r^{-j}, i.e. on an
// exponential in time. This is the regime where capacities derived from the
// fitted curve track the true discrete costs.
inline FrequencyProfile grid_profile(std::mt19937& rng, ClassKey key, Quanta tau,
                                     int max_points = 4, bool allow_collapse = true) {
  std::uniform_int_distribution<int> points_dist(2, max_points);
  std::uniform_int_distribution<int> base_dist(4, 9);
  std::uniform_real_distribution<double> a_dist(4000.0, 30000.0);
  std::uniform_real_distribution<double> c_dist(2000.0, 6000.0);
  std::uniform_real_distribution<double> r_dist(1.25, 1.8);
  static const int kFreqs[] = {1400, 1200, 1000, 800};

  const int n = points_dist(rng);
  const int base = base_dist(rng);
  const double a = a_dist(rng), c = c_dist(rng), r = r_dist(rng);
  FrequencyProfile prof;
  prof.key = key;
  if (allow_collapse && std::uniform_real_distribution<double>(0, 1)(rng) < 0.1) {
    // Dominated slow point: the Pareto set collapses to one operating point.
    prof.points.push_back(ProfilePoint{kFreqs[0], base * tau, 4000});
    prof.points.push_back(ProfilePoint{kFreqs[1], (base + 1) * tau, 4500});
    return prof;
  }
  for (int j = 0; j < n; ++j) {
    ProfilePoint p;
    p.freq_mhz = kFreqs[j];
    p.time = (base + j) * tau;
    p.energy = std::llround(c + a * std::pow(r, -j));
    prof.points.push_back(p);
  }
  return prof;
}

inline ProfileSet grid_profiles(std::mt19937& rng, int stages, Quanta tau, int max_points = 4,
                                bool allow_collapse = true) {
  ProfileSet set;
  set.p_blocking_watts = kDefaultBlockingWatts;
  for (int s = 0; s < stages; ++s) {
    set.profiles.push_back(grid_profile(rng, ClassKey{s, Kind::Forward}, tau, max_points,
                                        allow_collapse));
    set.profiles.push_back(grid_profile(rng, ClassKey{s, Kind::Backward}, tau, max_points,
                                        allow_collapse));
  }
  return set;
}

// ---- independent oracles ---------------------------------------------------

// Longest source->sink path in an edge-centric DAG by plain DFS memoization
// (different traversal from the library's Kahn passes). Walks that dead-end
// away from the sink do not count; 0 if the sink is unreachable.
inline Quanta longest_path_oracle(const EdgeDag& dag, const Durations& durations) {
  constexpr Quanta kUnvisited = -1, kUnreachable = -2;
  std::vector<std::vector<int>> out(dag.node_count);
  for (int k = 0; k < static_cast<int>(dag.edges.size()); ++k) out[dag.edges[k].tail].push_back(k);
  std::vector<Quanta> memo(dag.node_count, kUnvisited);
  auto dfs = [&](auto&& self, int v) -> Quanta {
    if (v == dag.sink) return 0;
    if (memo[v] != kUnvisited) return memo[v];
    Quanta best = kUnreachable;
    for (int k : out[v]) {
      const auto& e = dag.edges[k];
      const Quanta sub = self(self, e.head);
      if (sub == kUnreachable) continue;
      const Quanta d = e.computation >= 0 ? durations[e.computation] : 0;
      best = std::max(best, d + sub);
    }
    return memo[v] = best;
  };
  const Quanta len = dfs(dfs, dag.source);
  return len == kUnreachable ? 0 : len;
}

// Edge lies on some longest path iff dist_from_source(tail) + dur +
// dist_to_sink(head) equals the makespan.
inline std::vector<char> critical_edges_oracle(const EdgeDag& dag, const Durations& durations) {
  std::vector<std::vector<int>> out(dag.node_count), in(dag.node_count);
  for (int k = 0; k < static_cast<int>(dag.edges.size()); ++k) {
    out[dag.edges[k].tail].push_back(k);
    in[dag.edges[k].head].push_back(k);
  }
  auto dur = [&](int k) -> Quanta {
    return dag.edges[k].computation >= 0 ? durations[dag.edges[k].computation] : 0;
  };
  std::vector<Quanta> from(dag.node_count, -1), to(dag.node_count, -1);
  auto dfs_to = [&](auto&& self, int v) -> Quanta {
    if (to[v] >= 0) return to[v];
    Quanta best = 0;
    for (int k : out[v]) best = std::max(best, dur(k) + self(self, dag.edges[k].head));
    return to[v] = best;
  };
  auto dfs_from = [&](auto&& self, int v) -> Quanta {
    if (from[v] >= 0) return from[v];
    Quanta best = 0;
    for (int k : in[v]) best = std::max(best, self(self, dag.edges[k].tail) + dur(k));
    return from[v] = best;
  };
  const Quanta makespan = dfs_to(dfs_to, dag.source);
  std::vector<char> crit(dag.edges.size(), 0);
  for (size_t k = 0; k < dag.edges.size(); ++k)
    crit[k] = dfs_from(dfs_from, dag.edges[k].tail) + dur(static_cast<int>(k)) +
                  dfs_to(dfs_to, dag.edges[k].head) ==
              makespan;
  return crit;
}

// Plain Edmonds-Karp without lower bounds, written against an adjacency
// matrix; cross-checks the arc-based engine on l = 0 instances.
inline std::int64_t max_flow_matrix_oracle(int n, int s, int t,
                                           std::vector<std::vector<std::int64_t>> cap) {
  std::int64_t total = 0;
  while (true) {
    std::vector<int> prev(n, -1);
    prev[s] = s;
    std::vector<int> queue{s};
    for (size_t qi = 0; qi < queue.size() && prev[t] == -1; ++qi) {
      const int u = queue[qi];
      for (int v = 0; v < n; ++v)
        if (cap[u][v] > 0 && prev[v] == -1) {
          prev[v] = u;
          queue.push_back(v);
        }
    }
    if (prev[t] == -1) return total;
    std::int64_t bottleneck = std::numeric_limits<std::int64_t>::max();
    for (int v = t; v != s; v = prev[v]) bottleneck = std::min(bottleneck, cap[prev[v]][v]);
    for (int v = t; v != s; v = prev[v]) {
      cap[prev[v]][v] -= bottleneck;
      cap[v][prev[v]] += bottleneck;
    }
    total += bottleneck;
  }
}

// Minimum s-t cut cost by exhaustive S-set enumeration on the bounded graph:
// cost(S) = sum of upper over S->T edges minus sum of lower over T->S edges.
inline std::int64_t min_cut_bruteforce(const FlowGraph& g) {
  const Millijoules sentinel = g.infinity_sentinel();
  const int n = g.node_count;
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (!(mask >> g.source & 1) || (mask >> g.sink & 1)) continue;
    std::int64_t cost = 0;
    for (const auto& e : g.edges) {
      const bool ts = mask >> e.tail & 1, hs = mask >> e.head & 1;
      if (ts && !hs) cost += g.resolved_upper(e, sentinel);
      if (!ts && hs) cost -= e.lower;
    }
    best = std::min(best, cost);
  }
  return best;
}

// Feasibility of a flow respecting [l, u] on every edge: Hoffman's condition
// on the circulation closure (add sink->source with unbounded capacity) —
// a feasible circulation exists iff for every node set S, the lower bounds
// entering S never exceed the capacity leaving S.
inline bool feasible_bruteforce(const FlowGraph& g) {
  const Millijoules sentinel = g.infinity_sentinel();
  const int n = g.node_count;
  struct E {
    int tail, head;
    std::int64_t lower, upper;
  };
  std::vector<E> edges;
  for (const auto& e : g.edges)
    edges.push_back({e.tail, e.head, e.lower, g.resolved_upper(e, sentinel)});
  edges.push_back({g.sink, g.source, 0, std::numeric_limits<std::int64_t>::max() / 4});
  for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
    std::int64_t lower_in = 0, cap_out = 0;
    for (const auto& e : edges) {
      const bool ts = mask >> e.tail & 1, hs = mask >> e.head & 1;
      if (!ts && hs) lower_in += e.lower;
      if (ts && !hs) cap_out += e.upper;
    }
    if (lower_in > cap_out) return false;
  }
  return true;
}

// Random bounded flow graph; mix of forward-leaning edges so source-sink
// connectivity is common but not guaranteed.
inline FlowGraph random_flow_graph(std::mt19937& rng, int max_nodes = 8,
                                   std::int64_t max_cap = 30) {
  std::uniform_int_distribution<int> nodes_dist(2, max_nodes);
  const int n = nodes_dist(rng);
  FlowGraph g(n, 0, n - 1);
  std::uniform_int_distribution<int> edge_count(1, 2 * n);
  std::uniform_int_distribution<int> node_dist(0, n - 1);
  std::uniform_int_distribution<std::int64_t> cap_dist(0, max_cap);
  std::uniform_real_distribution<double> coin(0, 1);
  const int m = edge_count(rng);
  for (int i = 0; i < m; ++i) {
    int a = node_dist(rng), b = node_dist(rng);
    if (a == b) continue;
    std::int64_t lo = 0;
    if (coin(rng) < 0.4) lo = cap_dist(rng) / 3;
    if (coin(rng) < 0.15) {
      g.add_edge_infinite(a, b, lo);
    } else {
      const std::int64_t hi = lo + cap_dist(rng);
      g.add_edge(a, b, lo, hi);
    }
  }
  return g;
}

// Conservation and bound satisfaction for a returned assignment.
inline bool assignment_valid(const FlowGraph& g, const FlowAssignment& f) {
  const Millijoules sentinel = g.infinity_sentinel();
  std::vector<std::int64_t> balance(g.node_count, 0);
  for (size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    if (f.flow[i] < e.lower || f.flow[i] > g.resolved_upper(e, sentinel)) return false;
    balance[e.tail] -= f.flow[i];
    balance[e.head] += f.flow[i];
  }
  for (int v = 0; v < g.node_count; ++v) {
    if (v == g.source && balance[v] != -f.value) return false;
    if (v == g.sink && balance[v] != f.value) return false;
    if (v != g.source && v != g.sink && balance[v] != 0) return false;
  }
  return true;
}

// ---- small conveniences ----------------------------------------------------

inline CostModel model_of(const ProfileSet& set, std::int64_t quantum_us = kDefaultQuantumUs) {
  return CostModel::build(set, quantum_us);
}

inline double relative_gap(double algo, double exact) { return (algo - exact) / exact; }

}  // namespace testutil
