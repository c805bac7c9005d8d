#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "perseus/costmodel.hpp"
#include "perseus/dag.hpp"
#include "perseus/units.hpp"

namespace perseus {

struct Timeline {
  std::vector<Quanta> start;  // per computation id
  std::vector<Quanta> end;
  std::vector<Quanta> stage_busy;  // summed computation time per stage
  Quanta iteration_time = 0;
};

// Deterministic longest-path evaluation: every computation starts at the max
// end time of its predecessors; same-stage computations are serialized by the
// DAG's intra-stage chain edges.
inline Timeline simulate(const NodeDag& dag, const Durations& durations) {
  const int n = static_cast<int>(dag.computations.size());
  if (static_cast<int>(durations.size()) < n)
    throw std::invalid_argument("durations must cover every computation");
  for (int i = 0; i < n; ++i)
    if (durations[i] < 0) throw std::invalid_argument("durations must be non-negative");

  const auto order = detail::topo_order(dag.node_count(), dag.edges);
  std::vector<std::vector<int>> succ(dag.node_count());
  for (const auto& [u, v] : dag.edges) succ[u].push_back(v);

  auto dur = [&](int v) -> Quanta { return v < n ? durations[v] : 0; };
  std::vector<Quanta> begin(dag.node_count(), 0);
  for (int u : order)
    for (int v : succ[u]) begin[v] = std::max(begin[v], begin[u] + dur(u));

  Timeline tl;
  tl.start.resize(n);
  tl.end.resize(n);
  tl.stage_busy.assign(dag.num_stages, 0);
  for (int i = 0; i < n; ++i) {
    tl.start[i] = begin[i];
    tl.end[i] = begin[i] + durations[i];
    tl.stage_busy[dag.computations[i].stage] += durations[i];
  }
  tl.iteration_time = begin[dag.sink_id()];
  return tl;
}

// Three-part decomposition of one iteration stretched to a straggler time T':
// computation energy, intra-iteration blocking (stages idle while the
// pipeline runs), and straggler wait (all stages idle past T). The same total
// re-derived in effective-energy form cross-checks the arithmetic.
struct EnergyReport {
  double computation_mj = 0;
  double blocking_mj = 0;
  double straggler_mj = 0;
  double total_mj = 0;
  double effective_total_mj = 0;

  struct StageRow {
    int stage = 0;
    double computation_mj = 0;
    double blocking_mj = 0;
    double straggler_mj = 0;
  };
  std::vector<StageRow> per_stage;
};

inline EnergyReport energy_report(const NodeDag& dag, const Timeline& tl,
                                  const std::vector<Millijoules>& energies,
                                  BlockingPower blocking, Quanta t_prime,
                                  std::int64_t quantum_us = kDefaultQuantumUs) {
  const int n = static_cast<int>(dag.computations.size());
  if (static_cast<int>(energies.size()) < n)
    throw std::invalid_argument("energies must cover every computation");
  if (t_prime < tl.iteration_time)
    throw std::invalid_argument("straggler time cannot be shorter than the iteration itself");

  const int stages = dag.num_stages;
  const Quanta t = tl.iteration_time;
  EnergyReport rep;
  rep.per_stage.resize(stages);
  double sum_t_mj = 0;  // blocking-power-weighted computation time
  for (int i = 0; i < n; ++i) {
    const int s = dag.computations[i].stage;
    rep.per_stage[s].stage = s;
    rep.per_stage[s].computation_mj += static_cast<double>(energies[i]);
    rep.computation_mj += static_cast<double>(energies[i]);
  }
  for (int s = 0; s < stages; ++s) {
    rep.per_stage[s].stage = s;
    rep.per_stage[s].blocking_mj = blocking_energy_mj(blocking.watts, t - tl.stage_busy[s], quantum_us);
    rep.per_stage[s].straggler_mj = blocking_energy_mj(blocking.watts, t_prime - t, quantum_us);
    rep.blocking_mj += rep.per_stage[s].blocking_mj;
    rep.straggler_mj += rep.per_stage[s].straggler_mj;
    sum_t_mj += blocking_energy_mj(blocking.watts, tl.stage_busy[s], quantum_us);
  }
  rep.total_mj = rep.computation_mj + rep.blocking_mj + rep.straggler_mj;
  rep.effective_total_mj = rep.computation_mj - sum_t_mj +
                           blocking_energy_mj(blocking.watts, t_prime, quantum_us) * stages;
  if (std::abs(rep.total_mj - rep.effective_total_mj) > std::max(1.0, 1.0 * n))
    throw std::logic_error("energy decompositions disagree");
  return rep;
}

// Cluster of P identical pipelines, one of which straggles so the shared
// iteration boundary lands at factor times the fastest iteration time.
struct ClusterScenario {
  enum class Scaling { Strong, Weak };
  int pipelines = 1;
  double factor = 1.0;
  Scaling scaling = Scaling::Weak;
};

// Strong scaling holds the global batch fixed: microbatches per pipeline
// shrink as pipelines are added.
inline int strong_scaling_microbatches(int pipelines, int global_microbatches) {
  if (pipelines < 1) throw std::invalid_argument("need at least one pipeline");
  if (global_microbatches < pipelines || global_microbatches % pipelines != 0)
    throw std::invalid_argument("global batch must divide evenly across pipelines");
  return global_microbatches / pipelines;
}

// Every computation at its maximum profiled frequency: the fastest (and
// reference) operating point.
struct AllMaxAssignment {
  Durations durations;
  std::vector<Millijoules> energies;
  std::vector<int> freqs_mhz;
};

inline AllMaxAssignment all_max_assignment(const NodeDag& dag, const CostModel& model) {
  AllMaxAssignment out;
  for (const auto& comp : dag.computations) {
    const auto& point = model.require(class_of(comp)).fastest();
    out.durations.push_back(point.time);
    out.energies.push_back(point.energy);
    out.freqs_mhz.push_back(point.freq_mhz);
  }
  return out;
}

inline std::string timeline_csv(const NodeDag& dag, const Timeline& tl,
                                const std::vector<int>& freqs_mhz,
                                std::int64_t quantum_us = kDefaultQuantumUs) {
  const int n = static_cast<int>(dag.computations.size());
  if (static_cast<int>(freqs_mhz.size()) < n)
    throw std::invalid_argument("frequencies must cover every computation");
  std::ostringstream out;
  out << "computation_id,stage,microbatch,kind,start_us,end_us,freq_mhz\n";
  for (int i = 0; i < n; ++i) {
    const auto& c = dag.computations[i];
    out << c.id << ',' << c.stage << ',';
    if (c.microbatch) out << *c.microbatch;
    out << ',' << to_string(c.kind) << ',' << tl.start[i] * quantum_us << ','
        << tl.end[i] * quantum_us << ',' << freqs_mhz[i] << '\n';
  }
  return out.str();
}

// Stages as rows, computations as rectangles; fill darkens with frequency.
inline std::string timeline_svg(const NodeDag& dag, const Timeline& tl,
                                const std::vector<int>& freqs_mhz) {
  const int n = static_cast<int>(dag.computations.size());
  if (static_cast<int>(freqs_mhz.size()) < n)
    throw std::invalid_argument("frequencies must cover every computation");
  const int row_h = 28, pad = 4, label_w = 64;
  const int width = 1000, height = dag.num_stages * row_h + 2 * pad;
  const double scale =
      tl.iteration_time > 0 ? static_cast<double>(width - label_w) / tl.iteration_time : 1.0;
  int f_lo = freqs_mhz.empty() ? 0 : freqs_mhz[0], f_hi = f_lo;
  for (int f : freqs_mhz) {
    f_lo = std::min(f_lo, f);
    f_hi = std::max(f_hi, f);
  }
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width + 2 * pad << "\" height=\""
      << height << "\">\n";
  for (int s = 0; s < dag.num_stages; ++s)
    out << "  <text x=\"" << pad << "\" y=\"" << pad + s * row_h + row_h / 2 + 4
        << "\" font-size=\"11\" font-family=\"monospace\">stage " << s << "</text>\n";
  for (int i = 0; i < n; ++i) {
    const auto& c = dag.computations[i];
    const double x = pad + label_w + tl.start[i] * scale;
    const double w = std::max(1.0, (tl.end[i] - tl.start[i]) * scale);
    const double shade =
        f_hi > f_lo ? static_cast<double>(freqs_mhz[i] - f_lo) / (f_hi - f_lo) : 1.0;
    const int gray = static_cast<int>(208 - 128 * shade);
    const char* stroke = c.kind == Kind::Backward ? "#555577" : "#333333";
    out << "  <rect x=\"" << std::fixed << std::setprecision(1) << x << "\" y=\""
        << pad + c.stage * row_h + 2 << "\" width=\"" << w << "\" height=\"" << row_h - 4
        << "\" fill=\"rgb(" << gray << ',' << gray << ',' << gray << ")\" stroke=\"" << stroke
        << "\"><title>" << to_string(c.kind);
    if (c.microbatch) out << ' ' << *c.microbatch;
    out << " @" << freqs_mhz[i] << "MHz</title></rect>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace perseus
