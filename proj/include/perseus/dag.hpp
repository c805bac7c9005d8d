#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "perseus/units.hpp"

namespace perseus {

enum class Kind { Forward, Backward, Constant };

inline const char* to_string(Kind k) {
  switch (k) {
    case Kind::Forward: return "forward";
    case Kind::Backward: return "backward";
    case Kind::Constant: return "constant";
  }
  return "?";
}

inline Kind kind_from_string(const std::string& s) {
  if (s == "forward") return Kind::Forward;
  if (s == "backward") return Kind::Backward;
  if (s == "constant") return Kind::Constant;
  throw std::invalid_argument("unknown computation kind: " + s);
}

struct Computation {
  int id = 0;
  int stage = 0;
  std::optional<int> microbatch;  // absent for constant-duration work
  Kind kind = Kind::Constant;
};

// Per-computation durations, indexed by computation id.
using Durations = std::vector<Quanta>;

// Computation graph in node form: computations are nodes, dependencies are
// edges. Real computations use ids 0..n-1; a zero-duration virtual source
// (id n) and sink (id n+1) bracket the graph so that every computation lies
// on a source->sink path.
struct NodeDag {
  std::vector<Computation> computations;
  std::vector<std::pair<int, int>> edges;  // endpoints may be source_id()/sink_id()
  int num_stages = 0;

  int source_id() const { return static_cast<int>(computations.size()); }
  int sink_id() const { return static_cast<int>(computations.size()) + 1; }
  int node_count() const { return static_cast<int>(computations.size()) + 2; }
};

namespace detail {

// Kahn topological order over the full node set (computations + endpoints).
// Throws if the dependency graph has a cycle.
inline std::vector<int> topo_order(int node_count, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<int>> adj(node_count);
  std::vector<int> indeg(node_count, 0);
  for (const auto& [u, v] : edges) {
    adj[u].push_back(v);
    ++indeg[v];
  }
  std::deque<int> ready;
  for (int v = 0; v < node_count; ++v)
    if (indeg[v] == 0) ready.push_back(v);
  std::vector<int> order;
  order.reserve(node_count);
  while (!ready.empty()) {
    int u = ready.front();
    ready.pop_front();
    order.push_back(u);
    for (int v : adj[u])
      if (--indeg[v] == 0) ready.push_back(v);
  }
  if (static_cast<int>(order.size()) != node_count)
    throw std::invalid_argument("dependency graph contains a cycle");
  return order;
}

// Per-stage instruction stream for the one-forward-one-backward schedule:
// min(M, N-s) warm-up forwards, then alternating backward/forward pairs until
// forwards run out, then the remaining backwards.
inline std::vector<std::pair<Kind, int>> one_f_one_b_stage_stream(int num_stages, int microbatches,
                                                                  int stage) {
  std::vector<std::pair<Kind, int>> seq;
  int warmup = std::min(microbatches, num_stages - stage);
  int fwd = 0, bwd = 0;
  for (; fwd < warmup; ++fwd) seq.emplace_back(Kind::Forward, fwd);
  while (fwd < microbatches) {
    seq.emplace_back(Kind::Backward, bwd++);
    seq.emplace_back(Kind::Forward, fwd++);
  }
  while (bwd < microbatches) seq.emplace_back(Kind::Backward, bwd++);
  return seq;
}

inline std::vector<std::pair<Kind, int>> all_f_all_b_stage_stream(int microbatches) {
  std::vector<std::pair<Kind, int>> seq;
  for (int m = 0; m < microbatches; ++m) seq.emplace_back(Kind::Forward, m);
  for (int m = 0; m < microbatches; ++m) seq.emplace_back(Kind::Backward, m);
  return seq;
}

inline NodeDag build_pipeline(int num_stages, int microbatches, bool one_f_one_b) {
  if (num_stages < 1) throw std::invalid_argument("pipeline needs at least one stage");
  if (microbatches < 1) throw std::invalid_argument("pipeline needs at least one microbatch");
  NodeDag dag;
  dag.num_stages = num_stages;
  std::map<std::tuple<int, Kind, int>, int> ids;
  std::vector<std::vector<int>> stage_order(num_stages);
  for (int s = 0; s < num_stages; ++s) {
    auto seq = one_f_one_b ? one_f_one_b_stage_stream(num_stages, microbatches, s)
                           : all_f_all_b_stage_stream(microbatches);
    for (const auto& [kind, m] : seq) {
      int id = static_cast<int>(dag.computations.size());
      dag.computations.push_back(Computation{id, s, m, kind});
      ids[{s, kind, m}] = id;
      stage_order[s].push_back(id);
    }
  }
  for (int s = 0; s < num_stages; ++s)
    for (size_t i = 0; i + 1 < stage_order[s].size(); ++i)
      dag.edges.emplace_back(stage_order[s][i], stage_order[s][i + 1]);
  for (int s = 0; s + 1 < num_stages; ++s)
    for (int m = 0; m < microbatches; ++m) {
      dag.edges.emplace_back(ids[{s, Kind::Forward, m}], ids[{s + 1, Kind::Forward, m}]);
      dag.edges.emplace_back(ids[{s + 1, Kind::Backward, m}], ids[{s, Kind::Backward, m}]);
    }
  for (int s = 0; s < num_stages; ++s) {
    dag.edges.emplace_back(dag.source_id(), stage_order[s].front());
    dag.edges.emplace_back(stage_order[s].back(), dag.sink_id());
  }
  detail::topo_order(dag.node_count(), dag.edges);
  return dag;
}

}  // namespace detail

inline NodeDag build_1f1b(int num_stages, int microbatches) {
  return detail::build_pipeline(num_stages, microbatches, true);
}

inline NodeDag build_gpipe(int num_stages, int microbatches) {
  return detail::build_pipeline(num_stages, microbatches, false);
}

// Wraps a bare computation/dependency list into a NodeDag: validates ids and
// kinds, rejects cycles, and attaches the virtual endpoints to every
// computation without predecessors (resp. successors).
inline NodeDag finalize_custom_dag(std::vector<Computation> computations,
                                   std::vector<std::pair<int, int>> edges) {
  const int n = static_cast<int>(computations.size());
  if (n == 0) throw std::invalid_argument("dag needs at least one computation");
  std::vector<char> seen(n, 0);
  for (const auto& c : computations) {
    if (c.id < 0 || c.id >= n || seen[c.id]) throw std::invalid_argument("computation ids must be dense and unique");
    seen[c.id] = 1;
    if (c.stage < 0) throw std::invalid_argument("stage must be non-negative");
    if (c.kind != Kind::Constant && !c.microbatch)
      throw std::invalid_argument("forward/backward computations need a microbatch index");
    if (c.microbatch && *c.microbatch < 0) throw std::invalid_argument("microbatch must be non-negative");
  }
  std::sort(computations.begin(), computations.end(),
            [](const Computation& a, const Computation& b) { return a.id < b.id; });
  std::vector<int> indeg(n, 0), outdeg(n, 0);
  for (const auto& [u, v] : edges) {
    if (u < 0 || u >= n || v < 0 || v >= n) throw std::invalid_argument("edge references unknown computation");
    if (u == v) throw std::invalid_argument("self-dependency");
    ++outdeg[u];
    ++indeg[v];
  }
  NodeDag dag;
  dag.computations = std::move(computations);
  dag.edges = std::move(edges);
  dag.num_stages = 0;
  for (const auto& c : dag.computations) dag.num_stages = std::max(dag.num_stages, c.stage + 1);
  for (int v = 0; v < n; ++v) {
    if (indeg[v] == 0) dag.edges.emplace_back(dag.source_id(), v);
    if (outdeg[v] == 0) dag.edges.emplace_back(v, dag.sink_id());
  }
  detail::topo_order(dag.node_count(), dag.edges);
  return dag;
}

// Edge-centric form: every computation i becomes the edge 2i -> 2i+1 carrying
// its duration; each dependency becomes a zero-duration connector edge. The
// virtual endpoints map to dedicated source/sink nodes (2n, 2n+1).
struct EdgeDag {
  struct Edge {
    int tail = 0;
    int head = 0;
    int computation = -1;  // -1 marks a zero-duration dependency edge
  };
  int node_count = 0;
  int source = 0;
  int sink = 0;
  std::vector<Edge> edges;
  std::vector<Computation> computations;
};

inline EdgeDag to_edge_centric(const NodeDag& dag) {
  const int n = static_cast<int>(dag.computations.size());
  EdgeDag out;
  out.node_count = 2 * n + 2;
  out.source = 2 * n;
  out.sink = 2 * n + 1;
  out.computations = dag.computations;
  out.edges.reserve(n + dag.edges.size());
  for (int i = 0; i < n; ++i) out.edges.push_back({2 * i, 2 * i + 1, i});
  for (const auto& [u, v] : dag.edges) {
    int tail = (u == dag.source_id()) ? out.source : 2 * u + 1;
    int head = (v == dag.sink_id()) ? out.sink : 2 * v;
    out.edges.push_back({tail, head, -1});
  }
  return out;
}

struct SlackAnnotation {
  std::vector<Quanta> earliest;  // per edge-centric node
  std::vector<Quanta> latest;
  std::vector<char> critical;  // per edge
  Quanta makespan = 0;
};

inline SlackAnnotation annotate_slack(const EdgeDag& dag, const Durations& durations) {
  if (durations.size() < dag.computations.size())
    throw std::invalid_argument("durations must cover every computation");
  for (size_t i = 0; i < dag.computations.size(); ++i)
    if (durations[i] < 0) throw std::invalid_argument("durations must be non-negative");

  const int nn = dag.node_count;
  std::vector<std::vector<int>> out_edges(nn);
  std::vector<int> indeg(nn, 0);
  for (int k = 0; k < static_cast<int>(dag.edges.size()); ++k) {
    out_edges[dag.edges[k].tail].push_back(k);
    ++indeg[dag.edges[k].head];
  }
  std::deque<int> ready;
  for (int v = 0; v < nn; ++v)
    if (indeg[v] == 0) ready.push_back(v);
  std::vector<int> order;
  order.reserve(nn);
  while (!ready.empty()) {
    int u = ready.front();
    ready.pop_front();
    order.push_back(u);
    for (int k : out_edges[u])
      if (--indeg[dag.edges[k].head] == 0) ready.push_back(dag.edges[k].head);
  }
  if (static_cast<int>(order.size()) != nn) throw std::invalid_argument("edge-centric dag has a cycle");

  auto dur = [&](const EdgeDag::Edge& e) -> Quanta {
    return e.computation >= 0 ? durations[e.computation] : 0;
  };

  SlackAnnotation ann;
  ann.earliest.assign(nn, 0);
  for (int u : order)
    for (int k : out_edges[u]) {
      const auto& e = dag.edges[k];
      ann.earliest[e.head] = std::max(ann.earliest[e.head], ann.earliest[u] + dur(e));
    }
  ann.makespan = ann.earliest[dag.sink];
  ann.latest.assign(nn, ann.makespan);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    for (int k : out_edges[*it]) {
      const auto& e = dag.edges[k];
      ann.latest[*it] = std::min(ann.latest[*it], ann.latest[e.head] - dur(e));
    }
  ann.critical.assign(dag.edges.size(), 0);
  for (size_t k = 0; k < dag.edges.size(); ++k) {
    const auto& e = dag.edges[k];
    ann.critical[k] = ann.earliest[e.tail] == ann.latest[e.tail] &&
                      ann.earliest[e.head] == ann.latest[e.head] &&
                      ann.earliest[e.tail] + dur(e) == ann.earliest[e.head];
  }
  return ann;
}

// Keeps exactly the critical edges (the union of all longest source->sink
// paths); node ids and endpoints are preserved.
inline EdgeDag critical_subdag(const EdgeDag& dag, const SlackAnnotation& ann) {
  EdgeDag out;
  out.node_count = dag.node_count;
  out.source = dag.source;
  out.sink = dag.sink;
  out.computations = dag.computations;
  for (size_t k = 0; k < dag.edges.size(); ++k)
    if (ann.critical[k]) out.edges.push_back(dag.edges[k]);
  return out;
}

struct PartitionResult {
  std::vector<int> boundaries;  // stage s spans layers [boundaries[s], boundaries[s+1])
  double ratio = 1.0;           // heaviest stage sum / lightest stage sum
};

namespace detail {

struct RatioFrac {
  Quanta hi = 0, lo = 1;
  friend bool operator<(const RatioFrac& a, const RatioFrac& b) {
    return static_cast<__int128>(a.hi) * b.lo < static_cast<__int128>(b.hi) * a.lo;
  }
  friend bool operator==(const RatioFrac& a, const RatioFrac& b) {
    return static_cast<__int128>(a.hi) * b.lo == static_cast<__int128>(b.hi) * a.lo;
  }
};

inline double binomial_capped(int n, int k, double cap) {
  double r = 1.0;
  k = std::min(k, n - k);
  for (int i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > cap) return cap + 1;
  }
  return r;
}

// Exhaustive boundary enumeration in lexicographic order; the first partition
// achieving the best ratio is the lexicographically smallest tie.
inline PartitionResult partition_exhaustive(const std::vector<Quanta>& prefix, int stages) {
  const int layers = static_cast<int>(prefix.size()) - 1;
  std::vector<int> cur(stages + 1, 0);
  cur[stages] = layers;
  std::vector<int> best;
  RatioFrac best_ratio{std::numeric_limits<Quanta>::max(), 1};
  auto recurse = [&](auto&& self, int stage, Quanta hi, Quanta lo) -> void {
    if (stage == stages - 1) {
      Quanta sum = prefix[layers] - prefix[cur[stage]];
      RatioFrac r{std::max(hi, sum), std::min(lo, sum)};
      if (r < best_ratio) {
        best_ratio = r;
        best.assign(cur.begin(), cur.end());
      }
      return;
    }
    int remaining = stages - stage - 1;
    for (int next = cur[stage] + 1; next <= layers - remaining; ++next) {
      Quanta sum = prefix[next] - prefix[cur[stage]];
      cur[stage + 1] = next;
      self(self, stage + 1, std::max(hi, sum), std::min(lo, sum));
    }
  };
  recurse(recurse, 0, 0, std::numeric_limits<Quanta>::max());
  PartitionResult res;
  res.boundaries = best;
  res.ratio = static_cast<double>(best_ratio.hi) / static_cast<double>(best_ratio.lo);
  return res;
}

// Larger instances: every achievable (lightest, heaviest) pair consists of two
// contiguous-segment sums. Scan candidate floors, find the minimal achievable
// ceiling per floor by a min-max split DP, then reconstruct the
// lexicographically smallest boundary vector over all optimal (floor, ceiling)
// pairs.
inline PartitionResult partition_bounds(const std::vector<Quanta>& prefix, int stages) {
  const int layers = static_cast<int>(prefix.size()) - 1;
  const Quanta total = prefix[layers];
  std::vector<Quanta> sums;
  sums.reserve(static_cast<size_t>(layers) * (layers + 1) / 2);
  for (int i = 0; i < layers; ++i)
    for (int j = i + 1; j <= layers; ++j) sums.push_back(prefix[j] - prefix[i]);
  std::sort(sums.begin(), sums.end());
  sums.erase(std::unique(sums.begin(), sums.end()), sums.end());

  const Quanta inf = std::numeric_limits<Quanta>::max();
  // Minimal achievable heaviest-stage sum with every stage sum >= floor.
  auto min_ceiling = [&](Quanta floor) -> Quanta {
    std::vector<Quanta> prev(layers + 1, inf), next(layers + 1, inf);
    prev[0] = 0;
    for (int k = 1; k <= stages; ++k) {
      std::fill(next.begin(), next.end(), inf);
      for (int i = k; i <= layers; ++i)
        for (int j = k - 1; j < i; ++j) {
          if (prev[j] == inf) continue;
          Quanta seg = prefix[i] - prefix[j];
          if (seg < floor) continue;
          next[i] = std::min(next[i], std::max(prev[j], seg));
        }
      std::swap(prev, next);
    }
    return prev[layers];
  };

  RatioFrac best{inf, 1};
  for (Quanta lo : sums) {
    if (lo * stages > total) break;
    Quanta hi = min_ceiling(lo);
    if (hi == inf) continue;
    RatioFrac r{hi, lo};
    if (r < best) best = r;
  }

  // Feasibility of splitting the suffix starting at layer i into k stages with
  // each sum inside [lo, hi].
  auto reconstruct = [&](Quanta lo, Quanta hi) -> std::vector<int> {
    std::vector<std::vector<char>> feas(stages + 1, std::vector<char>(layers + 1, 0));
    feas[0][layers] = 1;
    for (int k = 1; k <= stages; ++k)
      for (int i = 0; i <= layers; ++i)
        for (int j = i + 1; j <= layers; ++j) {
          Quanta seg = prefix[j] - prefix[i];
          if (seg > hi) break;
          if (seg >= lo && feas[k - 1][j]) {
            feas[k][i] = 1;
            break;
          }
        }
    if (!feas[stages][0]) return {};
    std::vector<int> bounds{0};
    int at = 0;
    for (int k = stages; k >= 1; --k)
      for (int j = at + 1; j <= layers; ++j) {
        Quanta seg = prefix[j] - prefix[at];
        if (seg > hi) break;
        if (seg >= lo && feas[k - 1][j]) {
          bounds.push_back(j);
          at = j;
          break;
        }
      }
    return bounds;
  };

  std::vector<int> best_bounds;
  for (Quanta lo : sums) {
    // hi/lo == best.hi/best.lo with integral hi
    __int128 num = static_cast<__int128>(best.hi) * lo;
    if (num % best.lo != 0) continue;
    Quanta hi = static_cast<Quanta>(num / best.lo);
    if (!std::binary_search(sums.begin(), sums.end(), hi)) continue;
    auto bounds = reconstruct(lo, hi);
    if (bounds.empty()) continue;
    if (best_bounds.empty() || bounds < best_bounds) best_bounds = bounds;
  }
  PartitionResult res;
  res.boundaries = best_bounds;
  res.ratio = static_cast<double>(best.hi) / static_cast<double>(best.lo);
  return res;
}

}  // namespace detail

// Contiguous layer-to-stage assignment minimizing heaviest/lightest stage-sum
// ratio; ties resolved toward the lexicographically smallest boundary vector.
inline PartitionResult min_imbalance_partition(const std::vector<Quanta>& layer_latencies,
                                               int stages) {
  const int layers = static_cast<int>(layer_latencies.size());
  if (stages < 1) throw std::invalid_argument("need at least one stage");
  if (layers < stages) throw std::invalid_argument("more stages than layers");
  for (Quanta v : layer_latencies)
    if (v <= 0) throw std::invalid_argument("layer latencies must be positive");
  std::vector<Quanta> prefix(layers + 1, 0);
  for (int i = 0; i < layers; ++i) prefix[i + 1] = prefix[i] + layer_latencies[i];
  if (detail::binomial_capped(layers - 1, stages - 1, 2e6) <= 2e6)
    return detail::partition_exhaustive(prefix, stages);
  return detail::partition_bounds(prefix, stages);
}

}  // namespace perseus
