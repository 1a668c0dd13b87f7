#pragma once

#include <cmath>
#include <cstdint>

namespace hatsim {

// Simulation time is integer nanoseconds. All physical formulas are
// evaluated in double seconds and rounded half away from zero on entry.
using TimeNs = std::int64_t;

inline TimeNs to_ns(double seconds) {
  return static_cast<TimeNs>(std::llround(seconds * 1e9));
}

inline double to_seconds(TimeNs ns) { return static_cast<double>(ns) * 1e-9; }

}  // namespace hatsim
