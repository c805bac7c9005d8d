#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "perseus/costmodel.hpp"
#include "perseus/dag.hpp"
#include "perseus/emulator.hpp"
#include "perseus/flow.hpp"
#include "perseus/units.hpp"

namespace perseus {

// One point of the time-energy frontier. The planned side is the relaxed
// (continuous-duration) schedule the optimizer works on; the realized side is
// what discretization to profiled frequencies actually executes.
struct EnergySchedule {
  int schedule_id = 0;
  Durations planned_t;                 // per computation, quanta
  std::vector<Millijoules> planned_e;  // per computation, curve-relaxed energy
  std::vector<int> freq_mhz;           // per computation; empty before discretization
  Durations realized_t;
  std::vector<Millijoules> realized_e;
  Quanta t_planned = 0;
  Quanta t_realized = 0;
  double eff_planned_mj = 0;
  double eff_realized_mj = 0;

  bool discretized() const { return !freq_mhz.empty(); }
};

struct Frontier {
  std::vector<EnergySchedule> schedules;  // strictly decreasing planned T, T* first
  Quanta t_min = 0;  // all-max-frequency iteration time
  Quanta t_star = 0;  // minimum-energy iteration time
  int steps = 0;
};

// What a single reduction step did; used to audit cut-cost consistency.
struct StepInfo {
  Millijoules cut_cost = 0;
  std::vector<int> sped_up;      // computation ids shortened by tau
  std::vector<int> slowed_down;  // computation ids lengthened by tau
};

namespace detail {

inline double effective_total(const std::vector<Millijoules>& energies, const Durations& times,
                              BlockingPower blocking, std::int64_t quantum_us) {
  double total = 0;
  for (size_t i = 0; i < energies.size(); ++i)
    total += effective_energy_mj(energies[i], times[i], blocking, quantum_us);
  return total;
}

inline Millijoules planned_energy(const CostModel::ClassModel& cm, Quanta t) {
  if (cm.is_constant) return cm.pareto.front().energy;
  return std::llround(cm.curve->eval(static_cast<double>(t)));
}

inline void refresh_totals(const NodeDag& dag, const CostModel& model, EnergySchedule& s) {
  s.t_planned = simulate(dag, s.planned_t).iteration_time;
  s.eff_planned_mj = effective_total(s.planned_e, s.planned_t, model.blocking, model.quantum_us);
}

}  // namespace detail

// Seed of the frontier: every computation at its least-energy operating point
// (the long end of its curve interval). This is the T* endpoint.
inline EnergySchedule min_energy_schedule(const NodeDag& dag, const CostModel& model) {
  EnergySchedule s;
  for (const auto& comp : dag.computations) {
    const auto& cm = model.require(class_of(comp));
    const Quanta t = cm.is_constant ? cm.pareto.front().time : cm.curve->t_max;
    s.planned_t.push_back(t);
    s.planned_e.push_back(detail::planned_energy(cm, t));
  }
  detail::refresh_totals(dag, model, s);
  return s;
}

// One frontier step: annotate slack at the current planned durations, keep the
// critical sub-DAG, bound each critical computation by its cost to shift tau,
// and take a minimum cut. Cut edges crossing forward shorten by tau, crossing
// backward lengthen by tau (free slack reclaimed). Returns nothing when no cut
// of finite cost exists: the DAG is as fast as the curves allow.
inline std::optional<EnergySchedule> get_next_schedule(const NodeDag& dag,
                                                       const EnergySchedule& schedule,
                                                       const CostModel& model, Quanta tau,
                                                       StepInfo* info = nullptr) {
  if (tau <= 0) throw std::invalid_argument("tau must be positive");
  const EdgeDag edges = to_edge_centric(dag);
  const SlackAnnotation slack = annotate_slack(edges, schedule.planned_t);
  const EdgeDag critical = critical_subdag(edges, slack);
  const FlowGraph capacity = build_capacity_dag(critical, schedule.planned_t, model, tau);

  const auto flow = max_flow_lower_bounds(capacity);
  if (!flow) return std::nullopt;
  if (flow->value >= capacity.infinity_sentinel()) return std::nullopt;
  const CutResult cut = min_cut_from_flow(capacity, *flow);

  EnergySchedule next = schedule;
  next.freq_mhz.clear();
  next.realized_t.clear();
  next.realized_e.clear();
  StepInfo step;
  step.cut_cost = cut.cost;
  for (int e : cut.speed_up) {
    const int comp = critical.edges[e].computation;
    if (comp < 0) continue;
    next.planned_t[comp] -= tau;
    step.sped_up.push_back(comp);
  }
  for (int e : cut.slow_down) {
    const int comp = critical.edges[e].computation;
    if (comp < 0) continue;
    const auto& cm = model.require(class_of(critical.computations[comp]));
    if (cm.is_constant) continue;
    if (next.planned_t[comp] + tau > cm.curve->t_max) continue;  // no slack credit was taken
    next.planned_t[comp] += tau;
    step.slowed_down.push_back(comp);
  }
  for (int comp : step.sped_up)
    next.planned_e[comp] =
        detail::planned_energy(model.require(class_of(dag.computations[comp])), next.planned_t[comp]);
  for (int comp : step.slowed_down)
    next.planned_e[comp] =
        detail::planned_energy(model.require(class_of(dag.computations[comp])), next.planned_t[comp]);
  detail::refresh_totals(dag, model, next);
  if (info) *info = std::move(step);
  return next;
}

// Snap planned durations to profiled frequencies: the slowest frequency that
// still finishes within the planned duration (fastest available if even that
// is too slow), then re-simulate with the profiled times.
inline EnergySchedule discretize(const EnergySchedule& schedule, const NodeDag& dag,
                                 const CostModel& model) {
  EnergySchedule out = schedule;
  out.freq_mhz.clear();
  out.realized_t.clear();
  out.realized_e.clear();
  for (const auto& comp : dag.computations) {
    const auto& pareto = model.require(class_of(comp)).pareto;
    const Quanta planned = schedule.planned_t[comp.id];
    const ProfilePoint* chosen = &pareto.front();
    for (const auto& p : pareto) {
      if (p.time <= planned) chosen = &p;  // ascending time: last qualifying is slowest
    }
    out.freq_mhz.push_back(chosen->freq_mhz);
    out.realized_t.push_back(chosen->time);
    out.realized_e.push_back(chosen->energy);
  }
  out.t_realized = simulate(dag, out.realized_t).iteration_time;
  out.eff_realized_mj =
      detail::effective_total(out.realized_e, out.realized_t, model.blocking, model.quantum_us);
  return out;
}

// Walk the frontier from the minimum-energy point down to the all-max
// iteration time, one tau per step (final step clipped to land exactly on
// T_min). Every point is stored discretized.
inline Frontier discover_frontier(const NodeDag& dag, const CostModel& model,
                                  Quanta tau = kDefaultTauUs) {
  if (tau <= 0) throw std::invalid_argument("tau must be positive");
  Frontier frontier;
  const AllMaxAssignment all_max = all_max_assignment(dag, model);
  frontier.t_min = simulate(dag, all_max.durations).iteration_time;

  EnergySchedule current = min_energy_schedule(dag, model);
  frontier.t_star = current.t_planned;
  current.schedule_id = 0;
  frontier.schedules.push_back(discretize(current, dag, model));

  while (current.t_planned > frontier.t_min) {
    const Quanta step = std::min<Quanta>(tau, current.t_planned - frontier.t_min);
    auto next = get_next_schedule(dag, current, model, step);
    if (!next) break;
    if (next->t_planned >= current.t_planned) break;  // cut made no progress
    current = std::move(*next);
    current.schedule_id = static_cast<int>(frontier.schedules.size());
    frontier.schedules.push_back(discretize(current, dag, model));
    ++frontier.steps;
  }
  return frontier;
}

// The all-max reference as a degenerate schedule (planned == realized at the
// maximum profiled frequency); what runs before a frontier is ready.
inline EnergySchedule all_max_schedule(const NodeDag& dag, const CostModel& model) {
  const AllMaxAssignment am = all_max_assignment(dag, model);
  EnergySchedule s;
  s.schedule_id = -1;
  s.planned_t = am.durations;
  s.planned_e = am.energies;
  s.freq_mhz = am.freqs_mhz;
  s.realized_t = am.durations;
  s.realized_e = am.energies;
  s.t_planned = s.t_realized = simulate(dag, am.durations).iteration_time;
  s.eff_planned_mj = s.eff_realized_mj =
      detail::effective_total(am.energies, am.durations, model.blocking, model.quantum_us);
  return s;
}

// Schedule for a straggler-stretched iteration boundary T': the largest
// planned time on the frontier grid not exceeding min(T*, T'). Slower
// boundaries than T* gain nothing, faster ones than T_min are impossible, so
// both clamp to the frontier endpoints.
inline const EnergySchedule& lookup(const Frontier& frontier, Quanta straggler_time) {
  if (frontier.schedules.empty()) throw std::logic_error("frontier is empty");
  const Quanta target = std::min(frontier.t_star, straggler_time);
  auto it = std::lower_bound(
      frontier.schedules.begin(), frontier.schedules.end(), target,
      [](const EnergySchedule& s, Quanta t) { return s.t_planned > t; });
  if (it == frontier.schedules.end()) return frontier.schedules.back();
  return *it;
}

}  // namespace perseus
