#pragma once

#include <cmath>
#include <cstdint>

namespace perseus {

// Durations are integer multiples of a configurable time quantum (default 1 us),
// energies are integer millijoules. Keeping both integral makes critical-path
// membership and capacity arithmetic exact.
using Quanta = std::int64_t;
using Millijoules = std::int64_t;

inline constexpr std::int64_t kDefaultQuantumUs = 1;
inline constexpr double kDefaultBlockingWatts = 75.0;
inline constexpr Quanta kDefaultTauUs = 1000;

// Power drawn by an accelerator that is blocked waiting on a peer.
struct BlockingPower {
  double watts = kDefaultBlockingWatts;
};

inline Quanta seconds_to_quanta(double seconds, std::int64_t quantum_us = kDefaultQuantumUs) {
  return static_cast<Quanta>(std::llround(seconds * 1e6 / static_cast<double>(quantum_us)));
}

inline double quanta_to_seconds(Quanta q, std::int64_t quantum_us = kDefaultQuantumUs) {
  return static_cast<double>(q) * static_cast<double>(quantum_us) * 1e-6;
}

inline Millijoules joules_to_mj(double joules) {
  return static_cast<Millijoules>(std::llround(joules * 1e3));
}

inline double mj_to_joules(Millijoules mj) { return static_cast<double>(mj) * 1e-3; }

// Energy burned while blocked for t quanta, in millijoules (1 W over 1 us = 1e-3 mJ).
inline double blocking_energy_mj(double watts, Quanta t,
                                 std::int64_t quantum_us = kDefaultQuantumUs) {
  return watts * static_cast<double>(t) * static_cast<double>(quantum_us) * 1e-3;
}

// Consumed energy minus the energy the accelerator would burn anyway while
// blocked for the same span. May be negative.
inline double effective_energy_mj(double energy_mj, Quanta t, BlockingPower blocking,
                                  std::int64_t quantum_us = kDefaultQuantumUs) {
  return energy_mj - blocking_energy_mj(blocking.watts, t, quantum_us);
}

}  // namespace perseus
