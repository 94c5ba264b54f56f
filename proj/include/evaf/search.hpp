#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "evaf/measure.hpp"

namespace evaf {

/// (sqrt(5) - 1) / 2
inline constexpr double kGoldenConjugate = 0.6180339887498949;

struct EgsConfig {
  double mu = 0.001;  // stopping threshold, fraction of the initial interval
  double phi = kGoldenConjugate;

  void validate() const {
    if (!(mu > 0.0 && mu < 1.0)) throw InvalidArgument("mu must lie in (0, 1)");
    if (!(phi > 0.5 && phi < 1.0)) throw InvalidArgument("phi must lie in (0.5, 1)");
  }
};

/// One EGS iteration. Interval endpoints and probe times are fractional microseconds.
struct EgsStep {
  int iteration = 0;  // 1-based
  double lo = 0.0, hi = 0.0;  // interval searched in this iteration
  double t1 = 0.0, t2 = 0.0;  // probe centres
  double dt = 0.0;            // probe window length
  double f1 = 0.0, f2 = 0.0;  // probe scores
  bool kept_left = true;
  double next_lo = 0.0, next_hi = 0.0;
};

struct SearchResult {
  Timestamp t_star = 0;
  double p_star = 0.0;
  int iterations = 0;
  std::string method;
  std::vector<EgsStep> trace;  // EGS only
};

/// Exhaustive scan of the fixed-window focus curve; ties go to the earliest sample.
inline SearchResult naive_search(const PrefixIndex& index, Duration dt, Duration stride,
                                 Variant variant = Variant::sum_squared) {
  const FocusCurve curve = focus_curve(index, dt, stride, variant);
  const FocusScore& best = curve.samples[argmax_earliest(curve)];
  SearchResult r;
  r.method = "naive";
  r.t_star = best.t;
  r.p_star = time_to_position(index.sweep(), static_cast<double>(best.t));
  r.iterations = static_cast<int>(curve.samples.size());
  return r;
}

inline SearchResult naive_search(const PrefixIndex& index, Duration dt, Variant variant = Variant::sum_squared) {
  return naive_search(index, dt, dt, variant);
}

/*
 * Event-based golden search over the sweep interval.
 *
 * Each iteration probes two overlapping windows of length phi*T, one flush with
 * each end of the current interval [lo, hi], and keeps the window with the
 * higher score (left on ties). The kept window becomes the next interval, so
 * after n iterations its length is phi^n * T_initial and the probe window
 * adapts with it. The length is tracked multiplicatively so the iteration
 * count depends only on mu and phi.
 */
inline SearchResult egs(const PrefixIndex& index, const EgsConfig& cfg = {}, Variant variant = Variant::sum_squared) {
  cfg.validate();
  if (index.empty()) throw EmptyStreamError();

  const SweepConfig& sw = index.sweep();
  double lo = static_cast<double>(sw.t_start);
  double hi = static_cast<double>(sw.t_end);
  const double initial = hi - lo;
  double length = initial;

  SearchResult r;
  r.method = "egs";
  while (length > cfg.mu * initial) {
    EgsStep step;
    step.iteration = r.iterations + 1;
    step.lo = lo;
    step.hi = hi;
    step.dt = cfg.phi * length;
    step.t1 = lo + step.dt / 2.0;
    step.t2 = hi - step.dt / 2.0;
    const double dt_s = us_to_seconds(step.dt);
    step.f1 = window_score(index, covering_window(lo, lo + step.dt), dt_s, variant);
    step.f2 = window_score(index, covering_window(hi - step.dt, hi), dt_s, variant);
    step.kept_left = step.f1 >= step.f2;

    length = step.dt;
    if (step.kept_left) {
      hi = lo + length;
    } else {
      lo = hi - length;
    }
    step.next_lo = lo;
    step.next_hi = hi;
    r.trace.push_back(step);
    ++r.iterations;
  }
  const double mid = 0.5 * (lo + hi);
  r.t_star = static_cast<Timestamp>(std::floor(mid + 0.5));
  r.p_star = time_to_position(sw, static_cast<double>(r.t_star));
  return r;
}

/// Number of EGS iterations for a given configuration: smallest n with phi^n <= mu.
inline int egs_iteration_count(const EgsConfig& cfg) {
  cfg.validate();
  int n = 0;
  double length = 1.0;
  while (length > cfg.mu) {
    length *= cfg.phi;
    ++n;
  }
  return n;
}

/// CSV report, one row per EGS iteration. `best_position` is the midpoint of
/// the interval kept after the iteration; `abs_error` is filled when a ground
/// truth position is supplied.
inline std::string egs_trace_report(const SearchResult& result, const SweepConfig& sweep,
                                    std::optional<double> truth_position = std::nullopt) {
  std::ostringstream out;
  out << "iteration,lo_us,hi_us,t1_us,t2_us,dt_us,score1,score2,kept,best_position,abs_error\n";
  for (const EgsStep& s : result.trace) {
    const double best = time_to_position(sweep, std::floor(0.5 * (s.next_lo + s.next_hi) + 0.5));
    out << s.iteration << ',' << format_double(s.lo) << ',' << format_double(s.hi) << ',' << format_double(s.t1)
        << ',' << format_double(s.t2) << ',' << format_double(s.dt) << ',' << format_double(s.f1) << ','
        << format_double(s.f2) << ',' << (s.kept_left ? "left" : "right") << ',' << format_double(best) << ',';
    if (truth_position) out << format_double(std::abs(best - *truth_position));
    out << '\n';
  }
  return out.str();
}

}  // namespace evaf
