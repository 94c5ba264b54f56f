#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "evaf/io.hpp"
#include "evaf/prefix_index.hpp"

namespace evaf {

/// How the event-rate focus score aggregates pixels.
///   sum_squared: sum over pixels of the squared per-pixel event rate.
///   total_count: total events in the window divided by its length.
enum class Variant { sum_squared, total_count };

inline std::string_view to_string(Variant v) { return v == Variant::sum_squared ? "sum_squared" : "total_count"; }

inline Variant parse_variant(std::string_view s) {
  if (s == "sum_squared") return Variant::sum_squared;
  if (s == "total_count") return Variant::total_count;
  throw InvalidArgument("unknown variant '" + std::string(s) + "'");
}

struct FocusScore {
  double value = 0.0;
  Timestamp t = 0;
  Duration dt = 1;
};

struct FocusCurve {
  std::vector<FocusScore> samples;
  Variant variant = Variant::sum_squared;
};

/// Closed integer window [lo, hi].
struct Window {
  Timestamp lo = 0;
  Timestamp hi = 0;
};

/// The accumulation window around t of nominal length dt, clamped to the sweep.
inline Window accumulation_window(const SweepConfig& sweep, Timestamp t, Duration dt) {
  if (dt <= 0) throw InvalidArgument("accumulation interval must be positive");
  const Timestamp lo = t - dt / 2;
  const Timestamp hi = lo + dt;
  return {std::max(lo, sweep.t_start), std::min(hi, sweep.t_end)};
}

/// Integer window covering the real interval [lo, hi].
inline Window covering_window(double lo, double hi) {
  return {static_cast<Timestamp>(std::ceil(lo)), static_cast<Timestamp>(std::floor(hi))};
}

/// Events per second at one pixel over the window centred on t.
inline double er_rate(const PrefixIndex& index, Pixel px, Timestamp t, Duration dt) {
  const Window w = accumulation_window(index.sweep(), t, dt);
  if (w.lo > w.hi) return 0.0;
  return static_cast<double>(index.pixel_count(px, w.lo, w.hi)) / us_to_seconds(static_cast<double>(dt));
}

/// Focus score of the events in [w.lo, w.hi], normalised by an interval of dt_seconds.
inline double window_score(const PrefixIndex& index, Window w, double dt_seconds, Variant variant) {
  if (!(dt_seconds > 0.0)) throw InvalidArgument("accumulation interval must be positive");
  if (w.lo > w.hi) return 0.0;
  if (variant == Variant::total_count) {
    return static_cast<double>(index.count_window(w.lo, w.hi)) / dt_seconds;
  }
  return static_cast<double>(index.sum_squared_counts(w.lo, w.hi)) / (dt_seconds * dt_seconds);
}

inline FocusScore er_focus_score(const PrefixIndex& index, Timestamp t, Duration dt,
                                 Variant variant = Variant::sum_squared) {
  const Window w = accumulation_window(index.sweep(), t, dt);
  return {window_score(index, w, us_to_seconds(static_cast<double>(dt)), variant), t, dt};
}

/// Scores at t_start + dt/2, then every stride, while the window stays inside the sweep.
inline FocusCurve focus_curve(const PrefixIndex& index, Duration dt, Duration stride,
                              Variant variant = Variant::sum_squared) {
  if (dt <= 0) throw InvalidArgument("accumulation interval must be positive");
  if (stride <= 0) throw InvalidArgument("stride must be positive");
  const SweepConfig& sw = index.sweep();
  if (sw.duration() < dt) throw InvalidArgument("sweep shorter than the accumulation interval");

  FocusCurve curve;
  curve.variant = variant;
  const Timestamp half = dt / 2;
  for (Timestamp t = sw.t_start + half; t - half + dt <= sw.t_end; t += stride) {
    curve.samples.push_back(er_focus_score(index, t, dt, variant));
  }
  return curve;
}

/// Index of the first maximal sample. The curve must be non-empty.
inline std::size_t argmax_earliest(const FocusCurve& curve) {
  if (curve.samples.empty()) throw InvalidArgument("empty focus curve");
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.samples.size(); ++i) {
    if (curve.samples[i].value > curve.samples[best].value) best = i;
  }
  return best;
}

inline void write_curve_csv(std::ostream& out, const FocusCurve& curve) {
  out << "t_us,dt_us,score,variant\n";
  const std::string_view v = to_string(curve.variant);
  for (const FocusScore& s : curve.samples) {
    out << s.t << ',' << s.dt << ',' << format_double(s.value) << ',' << v << '\n';
  }
}

}  // namespace evaf
