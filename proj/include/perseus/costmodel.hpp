#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "perseus/dag.hpp"
#include "perseus/units.hpp"

namespace perseus {

// One measured operating point of a computation class.
struct ProfilePoint {
  int freq_mhz = 0;
  Quanta time = 0;
  Millijoules energy = 0;
};

// Computations sharing (stage, kind) share one time/energy profile.
struct ClassKey {
  int stage = 0;
  Kind kind = Kind::Forward;
  auto operator<=>(const ClassKey&) const = default;
};

inline ClassKey class_of(const Computation& c) { return ClassKey{c.stage, c.kind}; }

struct FrequencyProfile {
  ClassKey key;
  std::vector<ProfilePoint> points;  // sorted by strictly decreasing frequency
};

// Continuous relaxation e(t) = a*exp(b*t) + c of a Pareto profile, valid on
// [t_min, t_max]. a and c in millijoules, b in 1/quantum, a > 0, b < 0.
struct ExpCurve {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  Quanta t_min = 0;
  Quanta t_max = 0;
  double rmse = 0.0;

  double eval(double t) const { return a * std::exp(b * t) + c; }
};

struct DegenerateFit : std::domain_error {
  using std::domain_error::domain_error;
};

inline void validate_profile(const FrequencyProfile& p) {
  if (p.points.empty()) throw std::invalid_argument("profile has no points");
  for (const auto& pt : p.points)
    if (pt.freq_mhz <= 0 || pt.time <= 0 || pt.energy <= 0)
      throw std::invalid_argument("profile points must have positive frequency, time, and energy");
  for (size_t i = 0; i + 1 < p.points.size(); ++i)
    if (p.points[i].freq_mhz <= p.points[i + 1].freq_mhz)
      throw std::invalid_argument("profile frequencies must be strictly decreasing");
  if (p.key.kind == Kind::Constant && p.points.size() != 1)
    throw std::invalid_argument("constant classes have exactly one operating point");
  if (p.key.kind != Kind::Constant && p.points.size() < 2)
    throw std::invalid_argument("variable-frequency classes need at least two points");
}

// Points not dominated in (time, energy); ascending time, strictly decreasing
// energy. Duplicate (time, energy) pairs collapse to the higher frequency.
inline std::vector<ProfilePoint> pareto_filter(const std::vector<ProfilePoint>& points) {
  std::vector<ProfilePoint> sorted = points;
  std::sort(sorted.begin(), sorted.end(), [](const ProfilePoint& x, const ProfilePoint& y) {
    if (x.time != y.time) return x.time < y.time;
    if (x.energy != y.energy) return x.energy < y.energy;
    return x.freq_mhz > y.freq_mhz;
  });
  std::vector<ProfilePoint> kept;
  for (const auto& p : sorted)
    if (kept.empty() || p.energy < kept.back().energy) kept.push_back(p);
  return kept;
}

// Deterministic exponential fit: sweep c over 64 evenly spaced candidates in
// [0, 0.999*min(energy)], solve (a, b) by least squares on ln(energy - c),
// keep the candidate with the smallest energy-space RMSE. Two points solve
// exactly with c = 0.
inline ExpCurve fit_exp(const std::vector<ProfilePoint>& pareto) {
  if (pareto.size() < 2) throw std::invalid_argument("fit needs at least two points");
  std::vector<ProfilePoint> pts = pareto;
  std::sort(pts.begin(), pts.end(),
            [](const ProfilePoint& x, const ProfilePoint& y) { return x.time < y.time; });
  for (size_t i = 0; i + 1 < pts.size(); ++i)
    if (pts[i].time == pts[i + 1].time) throw std::invalid_argument("fit needs distinct times");
  const double e_min = static_cast<double>(pts.back().energy);
  const double e_max = static_cast<double>(pts.front().energy);
  if (e_min == e_max) throw DegenerateFit("all energies equal; treat the class as constant");
  if (e_min > e_max) throw std::invalid_argument("fit expects energy decreasing with time");

  ExpCurve curve;
  curve.t_min = pts.front().time;
  curve.t_max = pts.back().time;

  if (pts.size() == 2) {
    const double t1 = static_cast<double>(pts[0].time), t2 = static_cast<double>(pts[1].time);
    const double e1 = static_cast<double>(pts[0].energy), e2 = static_cast<double>(pts[1].energy);
    curve.b = std::log(e2 / e1) / (t2 - t1);
    curve.a = e1 * std::exp(-curve.b * t1);
    curve.c = 0.0;
    curve.rmse = 0.0;
    return curve;
  }

  const size_t n = pts.size();
  double best_rmse = -1.0;
  double lowest_energy = e_min;
  for (const auto& p : pts) lowest_energy = std::min(lowest_energy, static_cast<double>(p.energy));
  for (int j = 0; j < 64; ++j) {
    const double c = static_cast<double>(j) * (0.999 * lowest_energy) / 63.0;
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (const auto& p : pts) {
      const double t = static_cast<double>(p.time);
      const double y = std::log(static_cast<double>(p.energy) - c);
      st += t;
      sy += y;
      stt += t * t;
      sty += t * y;
    }
    const double dn = static_cast<double>(n);
    const double slope = (dn * sty - st * sy) / (dn * stt - st * st);
    const double intercept = (sy - slope * st) / dn;
    const double a = std::exp(intercept);
    double sq = 0;
    for (const auto& p : pts) {
      const double r = a * std::exp(slope * static_cast<double>(p.time)) + c -
                       static_cast<double>(p.energy);
      sq += r * r;
    }
    const double rmse = std::sqrt(sq / dn);
    if (best_rmse < 0 || rmse < best_rmse) {
      best_rmse = rmse;
      curve.a = a;
      curve.b = slope;
      curve.c = c;
      curve.rmse = rmse;
    }
  }
  if (curve.b >= 0) throw DegenerateFit("fitted exponent is not decreasing");
  return curve;
}

// Energy saved by slowing from t-tau to t, resp. from t to t+tau.
inline double e_plus(const ExpCurve& curve, Quanta t, Quanta tau) {
  return curve.eval(static_cast<double>(t - tau)) - curve.eval(static_cast<double>(t));
}

inline double e_minus(const ExpCurve& curve, Quanta t, Quanta tau) {
  return curve.eval(static_cast<double>(t)) - curve.eval(static_cast<double>(t + tau));
}

// Synthetic profile from a cubic power model: time = work/f, power =
// p_static + k*f^3. Yields an interior minimum-energy frequency for
// realistic constants.
inline FrequencyProfile synth_profile(double work_cycles, double p_static_watts,
                                      double k_watts_per_mhz3, const std::vector<int>& freqs_mhz,
                                      ClassKey key = ClassKey{0, Kind::Forward},
                                      std::int64_t quantum_us = kDefaultQuantumUs) {
  if (work_cycles <= 0) throw std::invalid_argument("work must be positive");
  if (freqs_mhz.empty()) throw std::invalid_argument("need at least one frequency");
  FrequencyProfile prof;
  prof.key = key;
  std::vector<int> freqs = freqs_mhz;
  std::sort(freqs.begin(), freqs.end(), std::greater<int>());
  for (int f : freqs) {
    if (f <= 0) throw std::invalid_argument("frequencies must be positive");
    const double time_s = work_cycles / (static_cast<double>(f) * 1e6);
    const double power_w = p_static_watts + k_watts_per_mhz3 * std::pow(static_cast<double>(f), 3);
    ProfilePoint pt;
    pt.freq_mhz = f;
    pt.time = seconds_to_quanta(time_s, quantum_us);
    pt.energy = joules_to_mj(power_w * time_s);
    prof.points.push_back(pt);
  }
  validate_profile(prof);
  return prof;
}

struct ProfileSet {
  double p_blocking_watts = kDefaultBlockingWatts;
  std::vector<FrequencyProfile> profiles;
};

// A profile set reduced to what the optimizer consumes: Pareto points plus the
// fitted relaxation (or a fixed point for constant classes).
struct CostModel {
  struct ClassModel {
    bool is_constant = false;
    std::vector<ProfilePoint> raw;     // as profiled, descending frequency
    std::vector<ProfilePoint> pareto;  // ascending time, strictly decreasing energy
    std::optional<ExpCurve> curve;

    const ProfilePoint& fastest() const { return pareto.front(); }
    const ProfilePoint& min_energy() const { return pareto.back(); }
  };

  std::map<ClassKey, ClassModel> classes;
  BlockingPower blocking;
  std::int64_t quantum_us = kDefaultQuantumUs;

  const ClassModel& require(ClassKey key) const {
    auto it = classes.find(key);
    if (it == classes.end()) throw std::invalid_argument("missing profile for a computation class");
    return it->second;
  }

  static CostModel build(const ProfileSet& set, std::int64_t quantum_us = kDefaultQuantumUs) {
    CostModel model;
    model.blocking.watts = set.p_blocking_watts;
    model.quantum_us = quantum_us;
    for (const auto& prof : set.profiles) {
      validate_profile(prof);
      if (model.classes.count(prof.key)) throw std::invalid_argument("duplicate profile class");
      ClassModel cm;
      cm.raw = prof.points;
      cm.pareto = pareto_filter(prof.points);
      if (prof.key.kind == Kind::Constant || cm.pareto.size() == 1) {
        cm.is_constant = true;
      } else {
        try {
          cm.curve = fit_exp(cm.pareto);
        } catch (const DegenerateFit&) {
          cm.is_constant = true;
          cm.pareto = {cm.pareto.front()};
        }
      }
      model.classes.emplace(prof.key, std::move(cm));
    }
    return model;
  }
};

}  // namespace perseus
