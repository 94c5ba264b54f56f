#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include <json.hpp>

#include "evaf/event.hpp"
#include "evaf/image.hpp"

namespace evaf {

inline constexpr std::string_view kEventsHeader = "# evaf-events v1";
inline constexpr std::string_view kToolkitVersion = "1.0.0";

enum class EventFormat { csv_v1 };

/// Contents of the JSON sidecar that accompanies an event file.
struct SequenceMeta {
  int width = 0;
  int height = 0;
  SweepConfig sweep;
  std::optional<double> ground_truth_position;
  std::optional<Timestamp> ground_truth_time;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();  // fields beyond the required set
};

/// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline nlohmann::ordered_json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sidecar

inline SequenceMeta meta_from_json(const nlohmann::ordered_json& j) {
  SequenceMeta m;
  try {
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    m.sweep.t_start = j.at("t_start").get<Timestamp>();
    m.sweep.t_end = j.at("t_end").get<Timestamp>();
    m.sweep.p_min = j.at("p_min").get<double>();
    m.sweep.p_max = j.at("p_max").get<double>();
    if (j.contains("ground_truth_position") && !j["ground_truth_position"].is_null()) {
      m.ground_truth_position = j["ground_truth_position"].get<double>();
    }
    if (j.contains("ground_truth_time") && !j["ground_truth_time"].is_null()) {
      m.ground_truth_time = j["ground_truth_time"].get<Timestamp>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("sidecar: ") + e.what());
  }
  static constexpr std::array<std::string_view, 8> known = {
      "width", "height", "t_start", "t_end", "p_min", "p_max", "ground_truth_position", "ground_truth_time"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) m.extra[it.key()] = it.value();
  }
  if (m.width <= 0 || m.height <= 0) throw ParseError("sidecar: width and height must be positive");
  try {
    m.sweep.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("sidecar: ") + e.what());
  }
  return m;
}

inline nlohmann::ordered_json meta_to_json(const SequenceMeta& m) {
  nlohmann::ordered_json j;
  j["width"] = m.width;
  j["height"] = m.height;
  j["t_start"] = m.sweep.t_start;
  j["t_end"] = m.sweep.t_end;
  j["p_min"] = m.sweep.p_min;
  j["p_max"] = m.sweep.p_max;
  if (m.ground_truth_position) j["ground_truth_position"] = *m.ground_truth_position;
  if (m.ground_truth_time) j["ground_truth_time"] = *m.ground_truth_time;
  for (auto it = m.extra.begin(); it != m.extra.end(); ++it) j[it.key()] = it.value();
  return j;
}

inline SequenceMeta read_sidecar(const std::filesystem::path& path) {
  return meta_from_json(detail::read_json_file(path));
}

inline void write_sidecar(const std::filesystem::path& path, const SequenceMeta& m) {
  detail::write_text_file(path, meta_to_json(m).dump(2) + "\n");
}

/// Sidecar path convention: same stem, `.json` extension.
inline std::filesystem::path sidecar_path_for(const std::filesystem::path& events_path) {
  auto p = events_path;
  p.replace_extension(".json");
  return p;
}

// ---------------------------------------------------------------------------
// Events, csv_v1

/// Parses a csv_v1 event file. The header line is mandatory; `#` lines are
/// comments; blank lines are skipped. Errors carry the 1-based line number.
inline EventStream parse_events(std::istream& in, const SequenceMeta& meta, EventFormat = EventFormat::csv_v1) {
  EventStream s;
  s.width = meta.width;
  s.height = meta.height;
  s.sweep = meta.sweep;

  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("missing header '" + std::string(kEventsHeader) + "'", 1);
  ++lineno;
  if (detail::trim(line) != kEventsHeader) {
    throw ParseError("expected header '" + std::string(kEventsHeader) + "'", lineno);
  }

  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view v = detail::trim(line);
    if (v.empty() || v.front() == '#') continue;

    std::array<std::string_view, 4> fields{};
    std::size_t nf = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= v.size(); ++i) {
      if (i == v.size() || v[i] == ',') {
        if (nf == fields.size()) throw ParseError("expected 4 fields t,x,y,p", lineno);
        fields[nf++] = v.substr(start, i - start);
        start = i + 1;
      }
    }
    if (nf != 4) throw ParseError("expected 4 fields t,x,y,p", lineno);

    Event e;
    int pol = 0;
    if (!detail::parse_int(fields[0], e.t) || !detail::parse_int(fields[1], e.x) ||
        !detail::parse_int(fields[2], e.y) || !detail::parse_int(fields[3], pol)) {
      throw ParseError("malformed event line '" + std::string(v) + "'", lineno);
    }
    if (pol != 1 && pol != -1) throw ParseError("polarity must be +1 or -1", lineno);
    e.p = static_cast<std::int8_t>(pol);
    if (!s.contains(e.pixel())) throw ParseError("pixel out of bounds", lineno);
    if (e.t < meta.sweep.t_start || e.t > meta.sweep.t_end) {
      throw ParseError("timestamp outside sweep range", lineno);
    }
    if (!s.events.empty() && e.t < s.events.back().t) throw ParseError("timestamp regression", lineno);
    s.events.push_back(e);
  }
  return s;
}

inline EventStream parse_events(std::string_view text, const SequenceMeta& meta) {
  std::istringstream in{std::string(text)};
  return parse_events(in, meta);
}

inline void write_events(std::ostream& out, const EventStream& s) {
  out << kEventsHeader << '\n';
  std::string buf;
  for (const Event& e : s.events) {
    buf.clear();
    buf += std::to_string(e.t);
    buf += ',';
    buf += std::to_string(e.x);
    buf += ',';
    buf += std::to_string(e.y);
    buf += ',';
    buf += e.p > 0 ? "1" : "-1";
    buf += '\n';
    out << buf;
  }
}

struct LoadedSequence {
  EventStream stream;
  SequenceMeta meta;
};

/// Loads an event file plus its sidecar (default: same stem with `.json`).
inline LoadedSequence load_sequence(const std::filesystem::path& events_path,
                                    std::optional<std::filesystem::path> sidecar = std::nullopt) {
  const auto meta_path = sidecar.value_or(sidecar_path_for(events_path));
  if (!std::filesystem::exists(meta_path)) throw IoError("missing sidecar " + meta_path.string());
  LoadedSequence seq;
  seq.meta = read_sidecar(meta_path);
  std::ifstream in(events_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + events_path.string());
  try {
    seq.stream = parse_events(in, seq.meta);
  } catch (const ParseError& e) {
    throw ParseError::in_context(events_path.string(), e);
  }
  return seq;
}

inline void save_sequence(const std::filesystem::path& events_path, const EventStream& s, const SequenceMeta& meta) {
  std::ofstream out(events_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + events_path.string());
  write_events(out, s);
  if (!out) throw IoError("write failed for " + events_path.string());
  out.close();
  write_sidecar(sidecar_path_for(events_path), meta);
}

// ---------------------------------------------------------------------------
// PGM

/// 16-bit binary PGM, linearly rescaled so min -> 0 and max -> 65535. A
/// constant image maps to all zeros.
inline void write_pgm16(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : img.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;
  std::string bytes;
  bytes.reserve(img.size() * 2);
  for (double v : img.data) {
    const auto q = static_cast<std::uint16_t>(std::lround((v - lo) * scale));
    bytes.push_back(static_cast<char>(q >> 8));
    bytes.push_back(static_cast<char>(q & 0xff));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

/// Reads P2/P5 PGM (8 or 16 bit). Values map to (0, 1] as (v + 1) / (maxval + 1)
/// so the result is a strictly positive linear intensity.
inline Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  auto next_token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };
  const std::string magic = next_token();
  if (magic != "P5" && magic != "P2") throw ParseError(path.string() + ": not a PGM file");
  int w = 0, h = 0, maxval = 0;
  if (!detail::parse_int(next_token(), w) || !detail::parse_int(next_token(), h) ||
      !detail::parse_int(next_token(), maxval) || w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw ParseError(path.string() + ": bad PGM header");
  }
  Image img(w, h);
  const double denom = static_cast<double>(maxval) + 1.0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    int v = 0;
    if (magic == "P2") {
      if (!detail::parse_int(next_token(), v)) throw ParseError(path.string() + ": truncated PGM");
    } else if (maxval < 256) {
      char c;
      if (!in.get(c)) throw ParseError(path.string() + ": truncated PGM");
      v = static_cast<unsigned char>(c);
    } else {
      char hi, lo;
      if (!in.get(hi) || !in.get(lo)) throw ParseError(path.string() + ": truncated PGM");
      v = (static_cast<unsigned char>(hi) << 8) | static_cast<unsigned char>(lo);
    }
    img.data[i] = (static_cast<double>(v) + 1.0) / denom;
  }
  return img;
}

}  // namespace evaf
