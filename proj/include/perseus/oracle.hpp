#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "perseus/costmodel.hpp"
#include "perseus/dag.hpp"
#include "perseus/emulator.hpp"
#include "perseus/frontier.hpp"
#include "perseus/units.hpp"

namespace perseus {

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExactPoint {
  Quanta time = 0;
  double eff_energy_mj = 0;
  std::vector<int> freq_mhz;  // per computation
};

// Exact Pareto frontier of the discrete problem: ascending time, strictly
// decreasing effective energy, no point dominated.
struct ExactFrontier {
  std::vector<ExactPoint> points;

  // Cheapest energy achievable within a time budget; nullptr if the budget is
  // below even the fastest assignment.
  const ExactPoint* optimum_at(Quanta budget) const {
    const ExactPoint* best = nullptr;
    for (const auto& p : points) {
      if (p.time > budget) break;
      best = &p;
    }
    return best;
  }
};

// Full enumeration of per-computation Pareto points. Intended for tiny
// instances only; the combination budget guards against misuse.
inline ExactFrontier brute_force_frontier(const NodeDag& dag, const CostModel& model,
                                          double combination_budget = 1e7) {
  const int n = static_cast<int>(dag.computations.size());
  std::vector<const std::vector<ProfilePoint>*> choices;
  double combinations = 1;
  for (const auto& comp : dag.computations) {
    choices.push_back(&model.require(class_of(comp)).pareto);
    combinations *= static_cast<double>(choices.back()->size());
    if (combinations > combination_budget)
      throw BudgetExceeded("assignment space exceeds the enumeration budget");
  }

  // Keep only the cheapest (first-enumerated on ties) assignment per distinct
  // iteration time; decode the surviving assignment codes at the end.
  std::vector<std::int64_t> stride(n, 1);
  for (int i = n - 2; i >= 0; --i)
    stride[i] = stride[i + 1] * static_cast<std::int64_t>(choices[i + 1]->size());
  std::map<Quanta, std::pair<double, std::int64_t>> best_by_time;
  std::vector<int> idx(n, 0);
  Durations durations(n);
  std::vector<Millijoules> energies(n);
  for (int i = 0; i < n; ++i) {
    durations[i] = (*choices[i])[0].time;
    energies[i] = (*choices[i])[0].energy;
  }
  std::int64_t code = 0;
  while (true) {
    const Quanta time = simulate(dag, durations).iteration_time;
    const double eff =
        detail::effective_total(energies, durations, model.blocking, model.quantum_us);
    auto [it, inserted] = best_by_time.try_emplace(time, eff, code);
    if (!inserted && eff < it->second.first) it->second = {eff, code};

    int pos = n - 1;
    while (pos >= 0 && idx[pos] + 1 == static_cast<int>(choices[pos]->size())) {
      idx[pos] = 0;
      durations[pos] = (*choices[pos])[0].time;
      energies[pos] = (*choices[pos])[0].energy;
      --pos;
    }
    if (pos < 0) break;
    ++idx[pos];
    durations[pos] = (*choices[pos])[idx[pos]].time;
    energies[pos] = (*choices[pos])[idx[pos]].energy;
    code = 0;
    for (int i = 0; i < n; ++i) code += stride[i] * idx[i];
  }

  ExactFrontier frontier;
  double best_energy = 0;
  bool have = false;
  for (const auto& [time, entry] : best_by_time) {
    if (have && entry.first >= best_energy) continue;
    best_energy = entry.first;
    have = true;
    ExactPoint point;
    point.time = time;
    point.eff_energy_mj = entry.first;
    std::int64_t c = entry.second;
    for (int i = 0; i < n; ++i) {
      const int k = static_cast<int>(c / stride[i]);
      c %= stride[i];
      point.freq_mhz.push_back((*choices[i])[k].freq_mhz);
    }
    frontier.points.push_back(std::move(point));
  }
  return frontier;
}

struct GapRow {
  Quanta budget = 0;
  double gap = 0;  // (lookup energy - exact energy) / exact energy
};

struct GapReport {
  std::vector<GapRow> rows;
  double max_gap = 0;
  double mean_gap = 0;
};

// How far the algorithm's realized schedules sit above the exact optimum, per
// exact-frontier time budget.
inline GapReport gap_report(const ExactFrontier& exact, const Frontier& frontier) {
  GapReport report;
  double sum = 0;
  for (const auto& point : exact.points) {
    const EnergySchedule& sched = lookup(frontier, point.time);
    GapRow row;
    row.budget = point.time;
    row.gap = (sched.eff_realized_mj - point.eff_energy_mj) / point.eff_energy_mj;
    report.rows.push_back(row);
    report.max_gap = std::max(report.max_gap, row.gap);
    sum += row.gap;
  }
  if (!report.rows.empty()) report.mean_gap = sum / static_cast<double>(report.rows.size());
  return report;
}

}  // namespace perseus
