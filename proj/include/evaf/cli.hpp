#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "evaf/eval.hpp"
#include "evaf/frame.hpp"
#include "evaf/io.hpp"
#include "evaf/measure.hpp"
#include "evaf/prefix_index.hpp"
#include "evaf/search.hpp"
#include "evaf/sim.hpp"

namespace evaf {

inline constexpr int kExitOk = 0;
inline constexpr int kExitBadInput = 1;
inline constexpr int kExitEmptyStream = 2;

inline std::string version_string() {
  return "evaf " + std::string(kToolkitVersion) + " (events csv_v1, manifest v1, bench v1)";
}

namespace cli_detail {

struct Options {
  int verbosity = 0;

  // simulate
  std::string spec_path;
  std::string suite;
  int suite_seeds = 5;
  int suite_size = 128;
  std::optional<std::uint64_t> seed;

  // shared inputs / outputs
  std::string events_path;
  std::string meta_path;
  std::string out_path;

  // focus / curve
  std::string method = "egs";
  std::optional<double> dt;
  std::optional<double> stride;
  std::optional<double> mu;
  std::optional<double> phi;
  std::string variant = "sum_squared";
  std::string trace_path;

  // reconstruct
  double t_seconds = 0.0;
  double decay = 0.0;
  double contrast = kDefaultContrastThreshold;
  std::string measure;

  // bench
  std::string dataset;
  std::string methods_path;
  std::size_t threads = 0;
};

inline constexpr double kDefaultNaiveDt = 0.055;  // seconds

inline LoadedSequence load(const Options& o) {
  std::optional<std::filesystem::path> meta;
  if (!o.meta_path.empty()) meta = o.meta_path;
  return load_sequence(o.events_path, meta);
}

inline void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    detail::write_text_file(path, text);
  }
}

inline int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.spec_path.empty() == o.suite.empty()) throw InvalidArgument("simulate needs exactly one of --spec, --suite");
  if (!o.suite.empty() && o.suite != "default") throw InvalidArgument("unknown suite '" + o.suite + "'");

  std::vector<SequenceSpec> specs;
  if (!o.suite.empty()) {
    specs = default_suite(o.suite_seeds, o.suite_size);
  } else {
    const std::filesystem::path p = o.spec_path;
    specs = sequence_specs_from_json(detail::read_json_file(p), p.parent_path());
  }
  if (o.seed) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      specs[i].scene.seed = *o.seed + i;
      if (specs[i].texture.source == "natural") {
        specs[i].texture.seed = specs[i].scene.seed;
        specs[i].scene.texture = make_texture(specs[i].texture, specs[i].scene.seed);
      }
    }
  }
  std::vector<std::string> warnings;
  const auto manifest = make_dataset(specs, o.out_path, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  out << manifest.dump(2) << '\n';
  return kExitOk;
}

inline int cmd_focus(const Options& o, std::ostream& out, std::ostream& err) {
  const Variant variant = parse_variant(o.variant);
  if (o.method == "egs") {
    if (o.dt || o.stride) throw InvalidArgument("--dt/--stride apply to --method naive only");
  } else if (o.method == "naive") {
    if (o.mu || o.phi) throw InvalidArgument("--mu/--phi apply to --method egs only");
    if (!o.trace_path.empty()) throw InvalidArgument("--trace applies to --method egs only");
  } else {
    throw InvalidArgument("unknown method '" + o.method + "'");
  }
  EgsConfig cfg;
  if (o.mu) cfg.mu = *o.mu;
  if (o.phi) cfg.phi = *o.phi;
  cfg.validate();

  const LoadedSequence seq = load(o);
  if (seq.stream.empty()) throw EmptyStreamError();
  const PrefixIndex index(seq.stream);

  SearchResult r;
  if (o.method == "egs") {
    r = egs(index, cfg, variant);
    if (!o.trace_path.empty()) {
      detail::write_text_file(o.trace_path,
                              egs_trace_report(r, seq.stream.sweep, seq.meta.ground_truth_position));
    }
  } else {
    const Duration dt = seconds_to_us(o.dt.value_or(kDefaultNaiveDt));
    const Duration stride = o.stride ? seconds_to_us(*o.stride) : dt;
    r = naive_search(index, dt, stride, variant);
  }
  if (o.verbosity > 0) err << seq.stream.size() << " events, " << r.iterations << " iterations\n";

  nlohmann::ordered_json j;
  j["t_star_us"] = r.t_star;
  j["p_star"] = r.p_star;
  j["method"] = r.method;
  j["iterations"] = r.iterations;
  out << j.dump() << '\n';
  return kExitOk;
}

inline int cmd_curve(const Options& o, std::ostream& out, std::ostream&) {
  const Variant variant = parse_variant(o.variant);
  const Duration dt = seconds_to_us(o.dt.value_or(kDefaultNaiveDt));
  const Duration stride = o.stride ? seconds_to_us(*o.stride) : dt;
  if (dt <= 0 || stride <= 0) throw InvalidArgument("--dt and --stride must be positive");

  const LoadedSequence seq = load(o);
  const PrefixIndex index(seq.stream);
  std::ostringstream csv;
  write_curve_csv(csv, focus_curve(index, dt, stride, variant));
  write_or_print(o.out_path, csv.str(), out);
  return kExitOk;
}

inline int cmd_reconstruct(const Options& o, std::ostream& out, std::ostream&) {
  std::optional<FrameMeasure> measure;
  if (!o.measure.empty()) measure = parse_frame_measure(o.measure);
  if (o.decay < 0.0) throw InvalidArgument("--decay must be non-negative");
  if (!(o.contrast > 0.0)) throw InvalidArgument("--contrast must be positive");

  const LoadedSequence seq = load(o);
  const Timestamp t = seconds_to_us(o.t_seconds);
  if (t < seq.stream.sweep.t_start || t > seq.stream.sweep.t_end) throw InvalidArgument("--t lies outside the sweep");
  const ReconFrame frame = reconstruct_frame(seq.stream, t, o.decay, o.contrast);
  if (!o.out_path.empty()) write_pgm16(o.out_path, frame.log_intensity);

  nlohmann::ordered_json j;
  j["t_us"] = t;
  j["mean_abs_log_intensity"] = mean_abs(frame.log_intensity);
  if (measure) j[std::string(to_string(*measure))] = frame_focus(frame, *measure);
  if (!o.out_path.empty()) j["out"] = o.out_path;
  out << j.dump() << '\n';
  return kExitOk;
}

inline int cmd_bench(const Options& o, std::ostream& out, std::ostream& err) {
  const std::vector<MethodSpec> methods =
      o.methods_path.empty() ? default_methods() : methods_from_json(detail::read_json_file(o.methods_path));
  const BenchReport report = run_benchmark(o.dataset, methods, o.threads);
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  const auto files = write_report(report, o.out_path);
  if (o.verbosity > 0) {
    for (const auto& f : files) err << "wrote " << f.string() << '\n';
  }
  write_aggregates_csv(out, report);
  return kExitOk;
}

}  // namespace cli_detail

/// Entry point shared by the `evaf` binary and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using cli_detail::Options;
  Options o;
  CLI::App app{"Event-camera autofocus toolkit"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "Print toolkit and format versions");
  app.add_flag("-v,--verbose", o.verbosity, "Diagnostics on standard error");

  auto* sim = app.add_subcommand("simulate", "Generate a simulated dataset");
  auto* spec_opt = sim->add_option("--spec", o.spec_path, "Sequence spec JSON");
  sim->add_option("--suite", o.suite, "Builtin suite name (default)")->excludes(spec_opt);
  sim->add_option("--seeds", o.suite_seeds, "Seeds per condition for --suite")->check(CLI::PositiveNumber);
  sim->add_option("--size", o.suite_size, "Texture side for --suite")->check(CLI::Range(8, 4096));
  sim->add_option("--seed", o.seed, "Override scene seeds (seed + index)");
  sim->add_option("--out", o.out_path, "Output directory")->required();

  auto add_input = [&](CLI::App* sub) {
    sub->add_option("--input,events", o.events_path, "Event file (csv_v1)")->required();
    sub->add_option("--meta", o.meta_path, "Metadata sidecar (default: same stem, .json)");
  };

  auto* focus = app.add_subcommand("focus", "Estimate the focal position");
  add_input(focus);
  focus->add_option("--method", o.method, "egs or naive")->check(CLI::IsMember({"egs", "naive"}));
  focus->add_option("--dt", o.dt, "Naive window length, seconds");
  focus->add_option("--stride", o.stride, "Naive window stride, seconds (default: dt)");
  focus->add_option("--mu", o.mu, "EGS stopping threshold");
  focus->add_option("--phi", o.phi, "EGS shrink factor");
  focus->add_option("--variant", o.variant, "sum_squared or total_count");
  focus->add_option("--trace", o.trace_path, "Write the EGS trace report CSV");

  auto* curve = app.add_subcommand("curve", "Dense ER focus curve as CSV");
  add_input(curve);
  curve->add_option("--dt", o.dt, "Window length, seconds");
  curve->add_option("--stride", o.stride, "Sample stride, seconds (default: dt)");
  curve->add_option("--variant", o.variant, "sum_squared or total_count");
  curve->add_option("--out", o.out_path, "Output CSV (default: standard output)");

  auto* recon = app.add_subcommand("reconstruct", "Direct-integration frame at a timestamp");
  add_input(recon);
  recon->add_option("--t", o.t_seconds, "Frame time, seconds")->required();
  recon->add_option("--decay", o.decay, "Decay rate, 1/s");
  recon->add_option("--contrast", o.contrast, "Contrast threshold C");
  recon->add_option("--measure", o.measure, "Also score the frame: grad, sml, variance, dct");
  recon->add_option("--out", o.out_path, "Output 16-bit PGM");

  auto* bench = app.add_subcommand("bench", "Benchmark methods on a dataset");
  bench->add_option("--dataset", o.dataset, "Dataset directory with manifest.json")->required();
  bench->add_option("--methods", o.methods_path, "Methods JSON (default: builtin list)");
  bench->add_option("--out", o.out_path, "Report stem: writes <stem>.csv, <stem>_aggregate.csv, <stem>.json")
      ->required();
  bench->add_option("--threads", o.threads, "Worker threads (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  if (show_version) {
    out << version_string() << '\n';
    return kExitOk;
  }
  try {
    if (sim->parsed()) return cli_detail::cmd_simulate(o, out, err);
    if (focus->parsed()) return cli_detail::cmd_focus(o, out, err);
    if (curve->parsed()) return cli_detail::cmd_curve(o, out, err);
    if (recon->parsed()) return cli_detail::cmd_reconstruct(o, out, err);
    if (bench->parsed()) return cli_detail::cmd_bench(o, out, err);
  } catch (const EmptyStreamError& e) {
    err << "error: " << e.what() << '\n';
    return kExitEmptyStream;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadInput;
  }
  err << app.help();
  return kExitBadInput;
}

}  // namespace evaf
