#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evaf/frame.hpp"
#include "evaf/io.hpp"
#include "evaf/measure.hpp"
#include "evaf/parallel.hpp"
#include "evaf/prefix_index.hpp"
#include "evaf/search.hpp"

namespace evaf {

enum class MethodKind { er_egs, er_naive, frame_baseline };

inline std::string_view to_string(MethodKind k) {
  switch (k) {
    case MethodKind::er_egs: return "er_egs";
    case MethodKind::er_naive: return "er_naive";
    case MethodKind::frame_baseline: return "frame_baseline";
  }
  return "?";
}

inline MethodKind parse_method_kind(std::string_view s) {
  if (s == "er_egs") return MethodKind::er_egs;
  if (s == "er_naive") return MethodKind::er_naive;
  if (s == "frame_baseline") return MethodKind::frame_baseline;
  throw InvalidArgument("unknown method kind '" + std::string(s) + "'");
}

struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::er_egs;
  Variant variant = Variant::sum_squared;

  // er_egs
  EgsConfig egs;

  // er_naive: window length in seconds, or as a fraction of the sweep duration
  std::optional<double> dt_seconds;
  std::optional<double> dt_fraction;
  std::optional<double> stride_seconds;  // defaults to the window length

  // frame_baseline
  FrameMeasure measure = FrameMeasure::grad;
  double fps = 100.0;
  double decay = 0.0;
  double contrast = kDefaultContrastThreshold;

  void validate() const {
    if (name.empty()) throw InvalidArgument("method name is empty");
    switch (kind) {
      case MethodKind::er_egs:
        egs.validate();
        break;
      case MethodKind::er_naive:
        if (dt_seconds.has_value() == dt_fraction.has_value()) {
          throw InvalidArgument(name + ": er_naive needs exactly one of dt, dt_fraction");
        }
        if (dt_seconds && !(*dt_seconds > 0.0)) throw InvalidArgument(name + ": dt must be positive");
        if (dt_fraction && !(*dt_fraction > 0.0 && *dt_fraction <= 1.0)) {
          throw InvalidArgument(name + ": dt_fraction must lie in (0, 1]");
        }
        if (stride_seconds && !(*stride_seconds > 0.0)) throw InvalidArgument(name + ": stride must be positive");
        break;
      case MethodKind::frame_baseline:
        if (!(fps > 0.0)) throw InvalidArgument(name + ": fps must be positive");
        if (!(decay >= 0.0)) throw InvalidArgument(name + ": decay must be non-negative");
        if (!(contrast > 0.0)) throw InvalidArgument(name + ": contrast must be positive");
        break;
    }
  }

  /// Naive window length for a given sweep.
  Duration naive_dt(const SweepConfig& sweep) const {
    if (dt_seconds) return seconds_to_us(*dt_seconds);
    return std::max<Duration>(1, static_cast<Duration>(std::floor(*dt_fraction * sweep.duration() + 0.5)));
  }
};

namespace detail {

inline void reject_keys(const nlohmann::ordered_json& j, const std::string& name,
                        std::initializer_list<std::string_view> keys, std::string_view kind) {
  for (std::string_view k : keys) {
    if (j.contains(std::string(k))) {
      throw InvalidArgument(name + ": '" + std::string(k) + "' does not apply to " + std::string(kind));
    }
  }
}

}  // namespace detail

inline MethodSpec method_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw InvalidArgument("method entry must be an object");
  MethodSpec m;
  try {
    m.kind = parse_method_kind(j.at("kind").get<std::string>());
    m.name = j.value("name", std::string(to_string(m.kind)));
    if (j.contains("variant")) m.variant = parse_variant(j.at("variant").get<std::string>());
    switch (m.kind) {
      case MethodKind::er_egs:
        detail::reject_keys(j, m.name, {"dt", "dt_fraction", "stride", "measure", "fps", "decay", "contrast"}, "er_egs");
        m.egs.mu = j.value("mu", m.egs.mu);
        m.egs.phi = j.value("phi", m.egs.phi);
        break;
      case MethodKind::er_naive:
        detail::reject_keys(j, m.name, {"mu", "phi", "measure", "fps", "decay", "contrast"}, "er_naive");
        if (j.contains("dt")) m.dt_seconds = j.at("dt").get<double>();
        if (j.contains("dt_fraction")) m.dt_fraction = j.at("dt_fraction").get<double>();
        if (j.contains("stride")) m.stride_seconds = j.at("stride").get<double>();
        break;
      case MethodKind::frame_baseline:
        detail::reject_keys(j, m.name, {"mu", "phi", "dt", "dt_fraction", "stride", "variant"}, "frame_baseline");
        if (j.contains("measure")) m.measure = parse_frame_measure(j.at("measure").get<std::string>());
        m.fps = j.value("fps", m.fps);
        m.decay = j.value("decay", m.decay);
        m.contrast = j.value("contrast", m.contrast);
        break;
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad method entry: ") + e.what());
  }
  m.validate();
  return m;
}

inline nlohmann::ordered_json method_to_json(const MethodSpec& m) {
  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["kind"] = to_string(m.kind);
  switch (m.kind) {
    case MethodKind::er_egs:
      j["variant"] = to_string(m.variant);
      j["mu"] = m.egs.mu;
      j["phi"] = m.egs.phi;
      break;
    case MethodKind::er_naive:
      j["variant"] = to_string(m.variant);
      if (m.dt_seconds) j["dt"] = *m.dt_seconds;
      if (m.dt_fraction) j["dt_fraction"] = *m.dt_fraction;
      if (m.stride_seconds) j["stride"] = *m.stride_seconds;
      break;
    case MethodKind::frame_baseline:
      j["measure"] = to_string(m.measure);
      j["fps"] = m.fps;
      j["decay"] = m.decay;
      j["contrast"] = m.contrast;
      break;
  }
  return j;
}

/// Accepts `{"methods": [...]}` or a bare array. Method names must be unique.
inline std::vector<MethodSpec> methods_from_json(const nlohmann::ordered_json& j) {
  const nlohmann::ordered_json& list = j.is_object() && j.contains("methods") ? j.at("methods") : j;
  if (!list.is_array() || list.empty()) throw InvalidArgument("methods must be a non-empty array");
  std::vector<MethodSpec> out;
  for (const auto& e : list) {
    out.push_back(method_from_json(e));
    for (std::size_t i = 0; i + 1 < out.size(); ++i) {
      if (out[i].name == out.back().name) throw InvalidArgument("duplicate method name '" + out.back().name + "'");
    }
  }
  return out;
}

/// ER+EGS with both score variants, the two fixed-window naive scans and the
/// four frame baselines at 100 FPS.
inline std::vector<MethodSpec> default_methods() {
  std::vector<MethodSpec> m;
  MethodSpec e;
  e.name = "er_egs";
  e.kind = MethodKind::er_egs;
  m.push_back(e);
  e.name = "er_egs_total_count";
  e.variant = Variant::total_count;
  m.push_back(e);
  for (double frac : {0.055, 0.065}) {
    MethodSpec n;
    n.name = "er_naive_" + format_double(frac);
    n.kind = MethodKind::er_naive;
    n.dt_fraction = frac;
    m.push_back(n);
  }
  for (FrameMeasure fm : {FrameMeasure::grad, FrameMeasure::sml, FrameMeasure::variance, FrameMeasure::dct}) {
    MethodSpec f;
    f.name = "frame_" + std::string(to_string(fm));
    f.kind = MethodKind::frame_baseline;
    f.measure = fm;
    m.push_back(f);
  }
  return m;
}

// ---------------------------------------------------------------------------

/// Frame times t_start + k / fps (rounded to microseconds) up to t_end.
inline std::vector<Timestamp> frame_times(const SweepConfig& sweep, double fps) {
  if (!(fps > 0.0)) throw InvalidArgument("fps must be positive");
  const double period = kMicrosPerSecond / fps;
  std::vector<Timestamp> times;
  for (std::int64_t k = 0;; ++k) {
    const Timestamp t = sweep.t_start + static_cast<Timestamp>(std::floor(static_cast<double>(k) * period + 0.5));
    if (t > sweep.t_end) break;
    if (times.empty() || t > times.back()) times.push_back(t);
  }
  return times;
}

/// Frame-measure score of frames reconstructed at `fps` across the sweep.
inline std::vector<FocusScore> frame_focus_curve(const EventStream& stream, FrameMeasure measure, double fps = 100.0,
                                                 double decay = 0.0, double contrast = kDefaultContrastThreshold) {
  const auto times = frame_times(stream.sweep, fps);
  const Duration period = static_cast<Duration>(std::floor(kMicrosPerSecond / fps + 0.5));
  DirectIntegrator integrator(stream, contrast, decay);
  std::vector<FocusScore> out;
  out.reserve(times.size());
  for (Timestamp t : times) {
    out.push_back({frame_focus(integrator.frame_at(t), measure), t, std::max<Duration>(1, period)});
  }
  return out;
}

/// Index of the maximal score; a run of equal maxima resolves to its median
/// (lower middle for an even count).
inline std::size_t argmax_median(const std::vector<FocusScore>& scores) {
  if (scores.empty()) throw InvalidArgument("empty focus curve");
  double best = scores.front().value;
  for (const auto& s : scores) best = std::max(best, s.value);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].value == best) idx.push_back(i);
  }
  return idx[(idx.size() - 1) / 2];
}

struct MethodResult {
  Timestamp t = 0;
  double position = 0.0;
  int iterations = 0;  // EGS iterations, naive samples or frames scored
};

inline MethodResult run_method(const MethodSpec& method, const EventStream& stream, const PrefixIndex& index) {
  method.validate();
  switch (method.kind) {
    case MethodKind::er_egs: {
      const SearchResult r = egs(index, method.egs, method.variant);
      return {r.t_star, r.p_star, r.iterations};
    }
    case MethodKind::er_naive: {
      const Duration dt = method.naive_dt(stream.sweep);
      const Duration stride = method.stride_seconds ? seconds_to_us(*method.stride_seconds) : dt;
      const SearchResult r = naive_search(index, dt, stride, method.variant);
      return {r.t_star, r.p_star, r.iterations};
    }
    case MethodKind::frame_baseline: {
      const auto curve = frame_focus_curve(stream, method.measure, method.fps, method.decay, method.contrast);
      const Timestamp t = curve[argmax_median(curve)].t;
      return {t, time_to_position(stream.sweep, static_cast<double>(t)), static_cast<int>(curve.size())};
    }
  }
  return {};
}

inline MethodResult run_method(const MethodSpec& method, const EventStream& stream) {
  return run_method(method, stream, PrefixIndex(stream));
}

// ---------------------------------------------------------------------------

struct ErrorStats {
  double mae = 0.0;
  double rmse = 0.0;
};

inline ErrorStats mae_rmse(const std::vector<double>& estimates, const std::vector<double>& truths) {
  if (estimates.size() != truths.size()) throw InvalidArgument("estimates and truths differ in length");
  if (estimates.empty()) throw InvalidArgument("no estimates to score");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double e = estimates[i] - truths[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const double n = static_cast<double>(estimates.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

struct BenchRow {
  std::string sequence;
  std::string condition;
  std::string method;
  double estimate = 0.0;
  double truth = 0.0;
  double abs_error = 0.0;
};

struct AggregateRow {
  std::string condition;  // "Total" for the all-sequence row
  std::string method;
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
};

struct BenchReport {
  std::vector<std::string> methods;
  std::vector<BenchRow> rows;
  std::vector<AggregateRow> aggregates;
  std::vector<std::string> warnings;
};

inline constexpr std::string_view kTotalCondition = "Total";

/// Per condition (in order of first appearance) and then "Total", one row per method.
inline std::vector<AggregateRow> aggregate_rows(const std::vector<BenchRow>& rows,
                                                const std::vector<std::string>& methods) {
  std::vector<std::string> conditions;
  for (const auto& r : rows) {
    if (std::find(conditions.begin(), conditions.end(), r.condition) == conditions.end()) {
      conditions.push_back(r.condition);
    }
  }
  std::vector<AggregateRow> out;
  auto add = [&](const std::string& cond, const std::string& method, bool all) {
    std::vector<double> est, tru;
    for (const auto& r : rows) {
      if (r.method == method && (all || r.condition == cond)) {
        est.push_back(r.estimate);
        tru.push_back(r.truth);
      }
    }
    if (est.empty()) return;
    const ErrorStats s = mae_rmse(est, tru);
    out.push_back({cond, method, s.mae, s.rmse, est.size()});
  };
  for (const auto& c : conditions) {
    for (const auto& m : methods) add(c, m, false);
  }
  for (const auto& m : methods) add(std::string(kTotalCondition), m, true);
  return out;
}

struct ManifestEntry {
  std::string id;
  std::string condition;
  std::filesystem::path events;
  std::filesystem::path metadata;
};

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dataset_dir) {
  const auto j = detail::read_json_file(dataset_dir / "manifest.json");
  std::vector<ManifestEntry> out;
  try {
    for (const auto& s : j.at("sequences")) {
      ManifestEntry e;
      e.id = s.at("id").get<std::string>();
      e.condition = s.value("condition", std::string("unknown"));
      e.events = dataset_dir / s.value("events", e.id + ".csv");
      e.metadata = dataset_dir / s.value("metadata", e.id + ".json");
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("bad manifest: ") + ex.what(), 0);
  }
  return out;
}

/// Runs every method on every manifest sequence. Sequences without a ground
/// truth position are skipped with a warning.
inline BenchReport run_benchmark(const std::filesystem::path& dataset_dir, const std::vector<MethodSpec>& methods,
                                 std::size_t max_threads = 0) {
  if (methods.empty()) throw InvalidArgument("no methods to benchmark");
  for (const auto& m : methods) m.validate();
  const auto entries = read_manifest(dataset_dir);

  std::vector<std::vector<BenchRow>> per_seq(entries.size());
  std::vector<std::string> skipped(entries.size());
  parallel_for(
      entries.size(),
      [&](std::size_t i) {
        const ManifestEntry& e = entries[i];
        const LoadedSequence seq = load_sequence(e.events, e.metadata);
        if (!seq.meta.ground_truth_position) {
          skipped[i] = e.id + ": no ground truth position, skipped";
          return;
        }
        const double truth = *seq.meta.ground_truth_position;
        const PrefixIndex index(seq.stream);
        for (const MethodSpec& m : methods) {
          MethodResult r;
          try {
            r = run_method(m, seq.stream, index);
          } catch (const Error& ex) {
            throw Error(e.id + " / " + m.name + ": " + ex.what());
          }
          per_seq[i].push_back({e.id, e.condition, m.name, r.position, truth, std::abs(r.position - truth)});
        }
      },
      max_threads);

  BenchReport report;
  for (const auto& m : methods) report.methods.push_back(m.name);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!skipped[i].empty()) report.warnings.push_back(skipped[i]);
    report.rows.insert(report.rows.end(), per_seq[i].begin(), per_seq[i].end());
  }
  report.aggregates = aggregate_rows(report.rows, report.methods);
  return report;
}

inline const AggregateRow* find_aggregate(const BenchReport& report, std::string_view condition,
                                          std::string_view method) {
  for (const auto& a : report.aggregates) {
    if (a.condition == condition && a.method == method) return &a;
  }
  return nullptr;
}

inline void write_rows_csv(std::ostream& out, const BenchReport& r) {
  out << "sequence,condition,method,estimate,truth,abs_error\n";
  for (const auto& row : r.rows) {
    out << row.sequence << ',' << row.condition << ',' << row.method << ',' << format_double(row.estimate) << ','
        << format_double(row.truth) << ',' << format_double(row.abs_error) << '\n';
  }
}

inline void write_aggregates_csv(std::ostream& out, const BenchReport& r) {
  out << "condition,method,mae,rmse,n\n";
  for (const auto& a : r.aggregates) {
    out << a.condition << ',' << a.method << ',' << format_double(a.mae) << ',' << format_double(a.rmse) << ','
        << a.n << '\n';
  }
}

inline nlohmann::ordered_json report_to_json(const BenchReport& r) {
  nlohmann::ordered_json j;
  j["format"] = "evaf-bench v1";
  j["methods"] = r.methods;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    j["rows"].push_back({{"sequence", row.sequence},
                         {"condition", row.condition},
                         {"method", row.method},
                         {"estimate", row.estimate},
                         {"truth", row.truth},
                         {"abs_error", row.abs_error}});
  }
  j["aggregates"] = nlohmann::ordered_json::array();
  for (const auto& a : r.aggregates) {
    j["aggregates"].push_back(
        {{"condition", a.condition}, {"method", a.method}, {"mae", a.mae}, {"rmse", a.rmse}, {"n", a.n}});
  }
  j["warnings"] = r.warnings;
  return j;
}

/// Writes `<stem>.csv`, `<stem>_aggregate.csv` and `<stem>.json`. A trailing
/// .csv or .json on `out` is dropped to form the stem.
inline std::vector<std::filesystem::path> write_report(const BenchReport& r, std::filesystem::path out) {
  if (out.extension() == ".csv" || out.extension() == ".json") out.replace_extension();
  const auto dir = out.parent_path();
  if (!dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  }
  const std::filesystem::path rows_path = out.string() + ".csv";
  const std::filesystem::path agg_path = out.string() + "_aggregate.csv";
  const std::filesystem::path json_path = out.string() + ".json";
  std::ostringstream rows, agg;
  write_rows_csv(rows, r);
  write_aggregates_csv(agg, r);
  detail::write_text_file(rows_path, rows.str());
  detail::write_text_file(agg_path, agg.str());
  detail::write_text_file(json_path, report_to_json(r).dump(2) + "\n");
  return {rows_path, agg_path, json_path};
}

}  // namespace evaf
