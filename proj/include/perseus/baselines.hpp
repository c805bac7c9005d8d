#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "perseus/costmodel.hpp"
#include "perseus/dag.hpp"
#include "perseus/emulator.hpp"
#include "perseus/frontier.hpp"
#include "perseus/units.hpp"

namespace perseus {

struct BaselinePoint {
  int freq_mhz = 0;
  Quanta iteration_time = 0;
  double eff_energy_mj = 0;
};

struct BaselineSchedule {
  std::vector<int> freq_mhz;  // per computation
  Durations durations;
  std::vector<Millijoules> energies;
  Quanta iteration_time = 0;
  double eff_energy_mj = 0;
};

namespace detail {

inline const ProfilePoint* point_at_freq(const std::vector<ProfilePoint>& points, int freq) {
  for (const auto& p : points)
    if (p.freq_mhz == freq) return &p;
  return nullptr;
}

// Nearest profiled frequency, ties toward the lower one.
inline const ProfilePoint& point_near_freq(const std::vector<ProfilePoint>& points, int freq) {
  const ProfilePoint* best = &points.front();
  for (const auto& p : points) {
    const int d = std::abs(p.freq_mhz - freq), bd = std::abs(best->freq_mhz - freq);
    if (d < bd || (d == bd && p.freq_mhz < best->freq_mhz)) best = &p;
  }
  return *best;
}

inline BaselineSchedule evaluate_assignment(const NodeDag& dag, const CostModel& model,
                                            BaselineSchedule s) {
  const Timeline tl = simulate(dag, s.durations);
  s.iteration_time = tl.iteration_time;
  s.eff_energy_mj = effective_total(s.energies, s.durations, model.blocking, model.quantum_us);
  return s;
}

}  // namespace detail

// One frequency for every computation, swept over the frequencies common to
// all variable classes. Constant computations keep their single point.
inline std::vector<BaselinePoint> baseline_zeus_global(const NodeDag& dag,
                                                       const CostModel& model) {
  std::optional<std::set<int>> common;
  for (const auto& comp : dag.computations) {
    const auto& cm = model.require(class_of(comp));
    if (cm.is_constant) continue;
    std::set<int> freqs;
    for (const auto& p : cm.raw) freqs.insert(p.freq_mhz);
    if (!common) {
      common = std::move(freqs);
    } else {
      std::set<int> kept;
      std::set_intersection(common->begin(), common->end(), freqs.begin(), freqs.end(),
                            std::inserter(kept, kept.begin()));
      *common = std::move(kept);
    }
  }
  std::vector<BaselinePoint> curve;
  if (!common || common->empty()) {
    const AllMaxAssignment am = all_max_assignment(dag, model);
    const Timeline tl = simulate(dag, am.durations);
    curve.push_back(BaselinePoint{
        am.freqs_mhz.empty() ? 0 : *std::max_element(am.freqs_mhz.begin(), am.freqs_mhz.end()),
        tl.iteration_time,
        detail::effective_total(am.energies, am.durations, model.blocking, model.quantum_us)});
    return curve;
  }
  for (auto it = common->rbegin(); it != common->rend(); ++it) {
    const int freq = *it;
    BaselineSchedule s;
    for (const auto& comp : dag.computations) {
      const auto& cm = model.require(class_of(comp));
      const ProfilePoint* p =
          cm.is_constant ? &cm.pareto.front() : detail::point_at_freq(cm.raw, freq);
      s.freq_mhz.push_back(p->freq_mhz);
      s.durations.push_back(p->time);
      s.energies.push_back(p->energy);
    }
    s = detail::evaluate_assignment(dag, model, std::move(s));
    curve.push_back(BaselinePoint{freq, s.iteration_time, s.eff_energy_mj});
  }
  return curve;
}

// Per-stage frequency chosen so each stage's per-microbatch forward time lands
// as close as possible to the slowest stage's fastest forward time. Ignores
// the critical path entirely, which is the point of comparing against it.
inline BaselineSchedule baseline_zeus_per_stage(const NodeDag& dag, const CostModel& model) {
  Quanta target = 0;
  for (int s = 0; s < dag.num_stages; ++s) {
    auto it = model.classes.find(ClassKey{s, Kind::Forward});
    if (it == model.classes.end()) continue;
    target = std::max(target, it->second.fastest().time);
  }
  std::vector<int> stage_freq(dag.num_stages, 0);
  for (int s = 0; s < dag.num_stages; ++s) {
    auto it = model.classes.find(ClassKey{s, Kind::Forward});
    if (it == model.classes.end()) continue;
    const ProfilePoint* best = nullptr;
    for (const auto& p : it->second.raw) {
      if (!best) {
        best = &p;
        continue;
      }
      const Quanta d = std::abs(p.time - target), bd = std::abs(best->time - target);
      if (d < bd || (d == bd && p.freq_mhz < best->freq_mhz)) best = &p;
    }
    stage_freq[s] = best ? best->freq_mhz : 0;
  }
  BaselineSchedule s;
  for (const auto& comp : dag.computations) {
    const auto& cm = model.require(class_of(comp));
    const ProfilePoint* p;
    if (cm.is_constant) {
      p = &cm.pareto.front();
    } else if (stage_freq[comp.stage] > 0) {
      p = detail::point_at_freq(cm.raw, stage_freq[comp.stage]);
      if (!p) p = &detail::point_near_freq(cm.raw, stage_freq[comp.stage]);
    } else {
      p = &cm.pareto.front();
    }
    s.freq_mhz.push_back(p->freq_mhz);
    s.durations.push_back(p->time);
    s.energies.push_back(p->energy);
  }
  return detail::evaluate_assignment(dag, model, std::move(s));
}

struct SavingsRow {
  double factor = 1.0;
  double savings_pct = 0;
  double savings_mj = 0;
};

// Energy saved across a cluster of P pipelines when one straggles to
// T' = factor * T_min: the P-1 healthy pipelines switch from all-max to the
// frontier schedule for T', the straggler runs all-max in both worlds.
inline std::vector<SavingsRow> straggler_savings(const Frontier& frontier, const NodeDag& dag,
                                                 const CostModel& model,
                                                 const ClusterScenario& scenario,
                                                 const std::vector<double>& factors) {
  if (scenario.pipelines < 1) throw std::invalid_argument("need at least one pipeline");
  const AllMaxAssignment all_max = all_max_assignment(dag, model);
  const Timeline base_tl = simulate(dag, all_max.durations);

  std::vector<SavingsRow> rows;
  for (double factor : factors) {
    if (factor < 1.0) throw std::invalid_argument("straggler factor must be >= 1");
    const Quanta t_prime = std::llround(factor * static_cast<double>(base_tl.iteration_time));
    const double all_max_mj =
        energy_report(dag, base_tl, all_max.energies, model.blocking, t_prime, model.quantum_us)
            .total_mj;
    const EnergySchedule& sched = lookup(frontier, t_prime);
    const double tuned_mj = energy_report(dag, simulate(dag, sched.realized_t), sched.realized_e,
                                          model.blocking, t_prime, model.quantum_us)
                                .total_mj;
    SavingsRow row;
    row.factor = factor;
    row.savings_mj = (scenario.pipelines - 1) * (all_max_mj - tuned_mj);
    row.savings_pct = 100.0 * row.savings_mj / (scenario.pipelines * all_max_mj);
    rows.push_back(row);
  }
  return rows;
}

inline std::string savings_csv(const std::vector<SavingsRow>& rows) {
  std::ostringstream out;
  out << "factor,savings_pct,savings_mj\n" << std::fixed << std::setprecision(3);
  for (const auto& r : rows)
    out << r.factor << ',' << r.savings_pct << ',' << r.savings_mj << '\n';
  return out.str();
}

}  // namespace perseus
