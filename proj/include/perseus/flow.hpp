#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "perseus/costmodel.hpp"
#include "perseus/dag.hpp"
#include "perseus/units.hpp"

namespace perseus {

// Directed graph with per-edge flow bounds [lower, upper]. Upper may be
// "infinite", which resolves to a per-graph sentinel larger than any finite
// cut so such edges are never selected by a minimum cut at finite cost.
struct FlowGraph {
  struct Edge {
    int tail = 0;
    int head = 0;
    Millijoules lower = 0;
    Millijoules upper = 0;
    bool infinite = false;
  };

  int node_count = 0;
  int source = 0;
  int sink = 0;
  std::vector<Edge> edges;

  FlowGraph(int nodes, int src, int snk) : node_count(nodes), source(src), sink(snk) {
    if (nodes < 2) throw std::invalid_argument("flow graph needs at least two nodes");
    if (src == snk || src < 0 || snk < 0 || src >= nodes || snk >= nodes)
      throw std::invalid_argument("invalid source/sink");
  }

  int add_edge(int tail, int head, Millijoules lower, Millijoules upper) {
    check_endpoints(tail, head);
    if (lower < 0) throw std::invalid_argument("negative lower bound");
    if (upper < lower) throw std::invalid_argument("upper bound below lower bound");
    edges.push_back(Edge{tail, head, lower, upper, false});
    return static_cast<int>(edges.size()) - 1;
  }

  int add_edge_infinite(int tail, int head, Millijoules lower = 0) {
    check_endpoints(tail, head);
    if (lower < 0) throw std::invalid_argument("negative lower bound");
    edges.push_back(Edge{tail, head, lower, 0, true});
    return static_cast<int>(edges.size()) - 1;
  }

  // One mJ more than every finite bound combined, recomputed per graph.
  Millijoules infinity_sentinel() const {
    __int128 sum = 0;
    for (const auto& e : edges) {
      sum += e.lower;
      if (!e.infinite) sum += e.upper;
    }
    sum += 1;
    if (sum > std::numeric_limits<Millijoules>::max() / 4)
      throw std::overflow_error("capacities too large for 64-bit flow arithmetic");
    return static_cast<Millijoules>(sum);
  }

  Millijoules resolved_upper(const Edge& e, Millijoules sentinel) const {
    return e.infinite ? sentinel : e.upper;
  }

 private:
  void check_endpoints(int tail, int head) const {
    if (tail < 0 || head < 0 || tail >= node_count || head >= node_count)
      throw std::invalid_argument("edge endpoint out of range");
    if (tail == head) throw std::invalid_argument("self-loops not allowed");
  }
};

struct FlowAssignment {
  std::vector<Millijoules> flow;  // indexed like FlowGraph::edges
  Millijoules value = 0;
  int augmenting_paths = 0;
};

struct CutResult {
  std::vector<char> source_side;  // per node, 1 if on the s side
  std::vector<int> speed_up;      // edge ids crossing S -> T
  std::vector<int> slow_down;     // edge ids crossing T -> S
  Millijoules cost = 0;
};

namespace detail {

// Residual network with paired arcs (arc i reverses arc i^1). BFS explores
// arcs in insertion order, so equal-cost choices resolve deterministically.
class ResidualNet {
 public:
  explicit ResidualNet(int nodes) : adj_(nodes) {}

  int add_arc_pair(int from, int to, Millijoules cap_fwd, Millijoules cap_bwd) {
    const int id = static_cast<int>(caps_.size());
    heads_.push_back(to);
    caps_.push_back(cap_fwd);
    adj_[from].push_back(id);
    heads_.push_back(from);
    caps_.push_back(cap_bwd);
    adj_[to].push_back(id + 1);
    return id;
  }

  Millijoules cap(int arc) const { return caps_[arc]; }

  // Edmonds-Karp from s to t; returns the augmented amount.
  Millijoules run(int s, int t, int* paths) {
    Millijoules total = 0;
    std::vector<int> parent_arc(adj_.size());
    while (true) {
      std::fill(parent_arc.begin(), parent_arc.end(), -1);
      parent_arc[s] = -2;
      std::queue<int> frontier;
      frontier.push(s);
      while (!frontier.empty() && parent_arc[t] == -1) {
        const int v = frontier.front();
        frontier.pop();
        for (int arc : adj_[v]) {
          const int w = heads_[arc];
          if (caps_[arc] > 0 && parent_arc[w] == -1) {
            parent_arc[w] = arc;
            frontier.push(w);
          }
        }
      }
      if (parent_arc[t] == -1) return total;
      Millijoules bottleneck = std::numeric_limits<Millijoules>::max();
      for (int v = t; v != s;) {
        const int arc = parent_arc[v];
        bottleneck = std::min(bottleneck, caps_[arc]);
        v = heads_[arc ^ 1];
      }
      for (int v = t; v != s;) {
        const int arc = parent_arc[v];
        caps_[arc] -= bottleneck;
        caps_[arc ^ 1] += bottleneck;
        v = heads_[arc ^ 1];
      }
      total += bottleneck;
      if (paths) ++*paths;
    }
  }

 private:
  std::vector<int> heads_;
  std::vector<Millijoules> caps_;
  std::vector<std::vector<int>> adj_;
};

}  // namespace detail

// Lower bounds are satisfied via an auxiliary graph: a super source feeds each
// node its incoming lower-bound mass, a super sink drains the outgoing mass,
// and a sink->source return arc closes the circulation. A feasible flow exists
// iff the auxiliary flow saturates every super-source arc; the feasible flow
// is then grown to a maximum on the bounded residuals.
inline std::optional<FlowAssignment> max_flow_lower_bounds(const FlowGraph& g) {
  const Millijoules sentinel = g.infinity_sentinel();
  const int n = g.node_count;
  const int super_src = n, super_snk = n + 1;

  detail::ResidualNet aux(n + 2);
  std::vector<int> edge_arc(g.edges.size());
  std::vector<Millijoules> lower_in(n, 0), lower_out(n, 0);
  __int128 aux_cap_total = 0;
  for (size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    const Millijoules slack = g.resolved_upper(e, sentinel) - e.lower;
    edge_arc[i] = aux.add_arc_pair(e.tail, e.head, slack, 0);
    lower_in[e.head] += e.lower;
    lower_out[e.tail] += e.lower;
    aux_cap_total += slack;
  }
  Millijoules lower_total = 0;
  for (int v = 0; v < n; ++v) {
    if (lower_in[v] > 0) {
      aux.add_arc_pair(super_src, v, lower_in[v], 0);
      lower_total += lower_in[v];
      aux_cap_total += lower_in[v];
    }
    if (lower_out[v] > 0) {
      aux.add_arc_pair(v, super_snk, lower_out[v], 0);
      aux_cap_total += lower_out[v];
    }
  }
  if (aux_cap_total + 1 > std::numeric_limits<Millijoules>::max() / 2)
    throw std::overflow_error("capacities too large for 64-bit flow arithmetic");
  const Millijoules return_cap = static_cast<Millijoules>(aux_cap_total) + 1;
  const int return_arc = aux.add_arc_pair(g.sink, g.source, return_cap, 0);

  int paths = 0;
  const Millijoules saturated = aux.run(super_src, super_snk, &paths);
  if (saturated != lower_total) return std::nullopt;

  std::vector<Millijoules> base(g.edges.size());
  for (size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    const Millijoules slack = g.resolved_upper(e, sentinel) - e.lower;
    base[i] = e.lower + (slack - aux.cap(edge_arc[i]));
  }
  const Millijoules base_value = return_cap - aux.cap(return_arc);

  detail::ResidualNet net(n);
  std::vector<int> arc2(g.edges.size());
  for (size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    arc2[i] = net.add_arc_pair(e.tail, e.head, g.resolved_upper(e, sentinel) - base[i],
                               base[i] - e.lower);
  }
  const Millijoules extra = net.run(g.source, g.sink, &paths);

  FlowAssignment out;
  out.flow.resize(g.edges.size());
  for (size_t i = 0; i < g.edges.size(); ++i)
    out.flow[i] = g.edges[i].lower + net.cap(arc2[i] ^ 1);
  out.value = base_value + extra;
  out.augmenting_paths = paths;
  return out;
}

// S = nodes reachable from the source through residual capacity (forward when
// flow < upper, backward when flow > lower). Crossing edges partition into
// speed-up (S->T, charged at upper) and slow-down (T->S, credited at lower).
inline CutResult min_cut_from_flow(const FlowGraph& g, const FlowAssignment& f) {
  if (f.flow.size() != g.edges.size())
    throw std::invalid_argument("flow does not match graph");
  const Millijoules sentinel = g.infinity_sentinel();
  std::vector<std::vector<std::pair<int, bool>>> adj(g.node_count);  // (edge, forward?)
  for (size_t i = 0; i < g.edges.size(); ++i) {
    adj[g.edges[i].tail].emplace_back(static_cast<int>(i), true);
    adj[g.edges[i].head].emplace_back(static_cast<int>(i), false);
  }
  CutResult cut;
  cut.source_side.assign(g.node_count, 0);
  cut.source_side[g.source] = 1;
  std::queue<int> frontier;
  frontier.push(g.source);
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    for (auto [e, forward] : adj[v]) {
      const auto& edge = g.edges[e];
      const int other = forward ? edge.head : edge.tail;
      if (cut.source_side[other]) continue;
      // Unbounded edges share the solver's sentinel cap; a lower bound elsewhere
      // can force a circulation that saturates one even when value < sentinel.
      const bool admissible = forward ? (f.flow[e] < g.resolved_upper(edge, sentinel))
                                      : (f.flow[e] > edge.lower);
      if (admissible) {
        cut.source_side[other] = 1;
        frontier.push(other);
      }
    }
  }
  if (cut.source_side[g.sink]) throw std::logic_error("flow is not maximum: sink reachable");
  for (size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    const bool tail_s = cut.source_side[e.tail], head_s = cut.source_side[e.head];
    if (tail_s && !head_s) {
      cut.speed_up.push_back(static_cast<int>(i));
      cut.cost += g.resolved_upper(e, sentinel);
    } else if (!tail_s && head_s) {
      cut.slow_down.push_back(static_cast<int>(i));
      cut.cost -= e.lower;
    }
  }
  return cut;
}

// Annotates a critical sub-DAG with the energy cost/gain of shifting each
// computation by tau at its current planned duration. Flow edge i corresponds
// to critical.edges[i]. Dependency edges and single-point classes get
// (0, infinite) so no finite cut modifies them; boundary durations lose the
// side that would leave the curve's valid interval.
inline FlowGraph build_capacity_dag(const EdgeDag& critical, const std::vector<Quanta>& planned,
                                    const CostModel& model, Quanta tau) {
  if (planned.size() != critical.computations.size())
    throw std::invalid_argument("planned durations do not match computations");
  if (tau <= 0) throw std::invalid_argument("tau must be positive");
  FlowGraph g(critical.node_count, critical.source, critical.sink);
  for (const auto& e : critical.edges) {
    if (e.computation < 0) {
      g.add_edge_infinite(e.tail, e.head);
      continue;
    }
    const Computation& comp = critical.computations[e.computation];
    const auto& cm = model.require(class_of(comp));
    if (cm.is_constant) {
      g.add_edge_infinite(e.tail, e.head);
      continue;
    }
    const ExpCurve& curve = *cm.curve;
    const Quanta t = planned[comp.id];
    const bool can_speed = t - tau >= curve.t_min;
    const bool can_slow = t + tau <= curve.t_max;
    Millijoules lower = 0;
    if (can_slow) lower = std::max<Millijoules>(0, std::llround(e_minus(curve, t, tau)));
    if (!can_speed) {
      g.add_edge_infinite(e.tail, e.head, lower);
    } else {
      const Millijoules upper =
          std::max<Millijoules>(lower, std::llround(e_plus(curve, t, tau)));
      g.add_edge(e.tail, e.head, lower, upper);
    }
  }
  return g;
}

inline std::string to_dot(const FlowGraph& g) {
  std::ostringstream out;
  out << "digraph flow {\n";
  out << "  // source=" << g.source << " sink=" << g.sink << "\n";
  for (const auto& e : g.edges) {
    out << "  n" << e.tail << " -> n" << e.head << " [label=\"" << e.lower << "/";
    if (e.infinite)
      out << "inf";
    else
      out << e.upper;
    out << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace perseus
