#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "evaf/error.hpp"

namespace evaf {

/// Timestamps and durations are integer microseconds.
using Timestamp = std::int64_t;
using Duration = std::int64_t;

inline constexpr double kMicrosPerSecond = 1e6;

/// Seconds to microseconds, rounding half up.
inline Duration seconds_to_us(double seconds) {
  return static_cast<Duration>(std::floor(seconds * kMicrosPerSecond + 0.5));
}

inline double us_to_seconds(double micros) { return micros / kMicrosPerSecond; }

struct Pixel {
  std::int32_t x = 0;
  std::int32_t y = 0;

  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

struct Event {
  Timestamp t = 0;
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int8_t p = 1;  // +1 or -1

  Pixel pixel() const { return {x, y}; }
  friend bool operator==(const Event&, const Event&) = default;
};

/// Linear lens sweep: focal position moves from p_min at t_start to p_max at t_end.
struct SweepConfig {
  Timestamp t_start = 0;
  Timestamp t_end = 10'000'000;
  double p_min = 220.0;
  double p_max = 3750.0;

  Duration duration() const { return t_end - t_start; }
  double range() const { return p_max - p_min; }

  void validate() const {
    if (!(t_end > t_start)) throw InvalidArgument("sweep requires t_end > t_start");
    if (!(p_max > p_min)) throw InvalidArgument("sweep requires p_max > p_min");
  }

  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

/// Focal position at time t (microseconds, may be fractional).
inline double time_to_position(const SweepConfig& sweep, double t) {
  if (t < static_cast<double>(sweep.t_start) || t > static_cast<double>(sweep.t_end)) {
    throw InvalidArgument("time " + std::to_string(t) + " outside sweep range");
  }
  if (t == static_cast<double>(sweep.t_end)) return sweep.p_max;
  const double frac = (t - static_cast<double>(sweep.t_start)) / static_cast<double>(sweep.duration());
  return sweep.p_min + frac * sweep.range();
}

/// Inverse of time_to_position, in fractional microseconds.
inline double position_to_time(const SweepConfig& sweep, double p) {
  if (p < sweep.p_min || p > sweep.p_max) {
    throw InvalidArgument("position " + std::to_string(p) + " outside sweep range");
  }
  return static_cast<double>(sweep.t_start) +
         (p - sweep.p_min) / sweep.range() * static_cast<double>(sweep.duration());
}

struct EventStream {
  std::vector<Event> events;
  int width = 0;
  int height = 0;
  SweepConfig sweep;

  bool empty() const { return events.empty(); }
  std::size_t size() const { return events.size(); }

  bool contains(Pixel px) const { return px.x >= 0 && px.y >= 0 && px.x < width && px.y < height; }

  /// Checks every stream invariant; throws ParseError naming the offending event ordinal.
  void validate() const {
    if (width <= 0 || height <= 0) throw InvalidArgument("sensor geometry must be positive");
    sweep.validate();
    for (std::size_t i = 0; i < events.size(); ++i) {
      const Event& e = events[i];
      const std::string where = "event " + std::to_string(i);
      if (e.p != 1 && e.p != -1) throw ParseError(where + ": polarity must be +1 or -1");
      if (!contains(e.pixel())) throw ParseError(where + ": pixel out of bounds");
      if (e.t < sweep.t_start || e.t > sweep.t_end) throw ParseError(where + ": timestamp outside sweep range");
      if (i > 0 && e.t < events[i - 1].t) throw ParseError(where + ": timestamp regression");
    }
  }
};

}  // namespace evaf
