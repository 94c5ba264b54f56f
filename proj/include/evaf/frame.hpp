#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "evaf/event.hpp"
#include "evaf/image.hpp"

namespace evaf {

inline constexpr double kDefaultContrastThreshold = 0.2;

struct ReconFrame {
  Image log_intensity;
  Timestamp t = 0;
};

/*
 * Direct integration of events into a log-intensity frame:
 *   L(x, t) = sum over t_k <= t of p_k * C * exp(-decay * (t - t_k))
 * decay is per second; 0 gives pure integration. The integrator walks the
 * stream forward once, so a sequence of frames at increasing t costs O(N_e)
 * plus O(pixels) per frame.
 */
class DirectIntegrator {
 public:
  DirectIntegrator(const EventStream& stream, double contrast = kDefaultContrastThreshold, double decay = 0.0)
      : stream_(&stream),
        contrast_(contrast),
        decay_(decay),
        value_(static_cast<std::size_t>(stream.width) * static_cast<std::size_t>(stream.height), 0.0),
        last_(value_.size(), 0) {
    if (decay < 0.0) throw InvalidArgument("decay must be non-negative");
    if (!(contrast > 0.0)) throw InvalidArgument("contrast threshold must be positive");
  }

  /// Frame at t. Calls must use non-decreasing t.
  ReconFrame frame_at(Timestamp t) {
    if (t < cursor_t_) throw InvalidArgument("integrator cannot move backwards in time");
    cursor_t_ = t;
    const auto& ev = stream_->events;
    while (next_ < ev.size() && ev[next_].t <= t) {
      const Event& e = ev[next_++];
      const std::size_t i = static_cast<std::size_t>(e.y) * static_cast<std::size_t>(stream_->width) +
                            static_cast<std::size_t>(e.x);
      if (decay_ > 0.0) value_[i] *= attenuation(e.t - last_[i]);
      value_[i] += e.p * contrast_;
      last_[i] = e.t;
    }
    ReconFrame f{Image(stream_->width, stream_->height), t};
    for (std::size_t i = 0; i < value_.size(); ++i) {
      f.log_intensity.data[i] = decay_ > 0.0 ? value_[i] * attenuation(t - last_[i]) : value_[i];
    }
    return f;
  }

 private:
  double attenuation(Duration dt_us) const { return std::exp(-decay_ * us_to_seconds(static_cast<double>(dt_us))); }

  const EventStream* stream_;
  double contrast_;
  double decay_;
  std::vector<double> value_;
  std::vector<Timestamp> last_;
  std::size_t next_ = 0;
  Timestamp cursor_t_ = std::numeric_limits<Timestamp>::min();
};

inline ReconFrame reconstruct_frame(const EventStream& stream, Timestamp t, double decay = 0.0,
                                    double contrast = kDefaultContrastThreshold) {
  return DirectIntegrator(stream, contrast, decay).frame_at(t);
}

inline double mean_abs(const Image& img) {
  if (img.empty()) return 0.0;
  double acc = 0.0;
  for (double v : img.data) acc += std::abs(v);
  return acc / static_cast<double>(img.size());
}

// ---------------------------------------------------------------------------
// Frame-based focus measures

enum class FrameMeasure { grad, sml, variance, dct };

inline std::string_view to_string(FrameMeasure m) {
  switch (m) {
    case FrameMeasure::grad: return "grad";
    case FrameMeasure::sml: return "sml";
    case FrameMeasure::variance: return "variance";
    case FrameMeasure::dct: return "dct";
  }
  return "?";
}

inline FrameMeasure parse_frame_measure(std::string_view s) {
  if (s == "grad") return FrameMeasure::grad;
  if (s == "sml") return FrameMeasure::sml;
  if (s == "variance") return FrameMeasure::variance;
  if (s == "dct") return FrameMeasure::dct;
  throw InvalidArgument("unknown frame measure '" + std::string(s) + "'");
}

/// Sum of squared central-difference gradients, replicate boundary.
inline double focus_grad(const Image& img) {
  double acc = 0.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double gx = 0.5 * (img.clamped(x + 1, y) - img.clamped(x - 1, y));
      const double gy = 0.5 * (img.clamped(x, y + 1) - img.clamped(x, y - 1));
      acc += gx * gx + gy * gy;
    }
  }
  return acc;
}

/// Sum-modified-Laplacian, step 1, no threshold.
inline double focus_sml(const Image& img) {
  double acc = 0.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double c = 2.0 * img.at(x, y);
      acc += std::abs(c - img.clamped(x - 1, y) - img.clamped(x + 1, y)) +
             std::abs(c - img.clamped(x, y - 1) - img.clamped(x, y + 1));
    }
  }
  return acc;
}

/// Grey-level variance of every 3x3 neighbourhood, summed.
inline double focus_local_variance(const Image& img) {
  double acc = 0.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double s = 0.0, s2 = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const double v = img.clamped(x + dx, y + dy);
          s += v;
          s2 += v * v;
        }
      }
      const double mean = s / 9.0;
      acc += std::max(0.0, s2 / 9.0 - mean * mean);
    }
  }
  return acc;
}

namespace detail {

// Orthonormal 8-point DCT-II basis: basis[u][x].
inline const std::array<std::array<double, 8>, 8>& dct8_basis() {
  static const auto table = [] {
    std::array<std::array<double, 8>, 8> b{};
    for (int u = 0; u < 8; ++u) {
      const double alpha = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) b[u][x] = alpha * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
    }
    return b;
  }();
  return table;
}

}  // namespace detail

/// Orthonormal 2-D DCT-II of the 8x8 block whose top-left corner is (x0, y0).
inline std::array<double, 64> dct8x8(const Image& img, int x0, int y0) {
  const auto& b = detail::dct8_basis();
  std::array<double, 64> rows{};  // transform along x
  for (int y = 0; y < 8; ++y) {
    for (int u = 0; u < 8; ++u) {
      double s = 0.0;
      for (int x = 0; x < 8; ++x) s += b[u][x] * img.at(x0 + x, y0 + y);
      rows[y * 8 + u] = s;
    }
  }
  std::array<double, 64> out{};
  for (int v = 0; v < 8; ++v) {
    for (int u = 0; u < 8; ++u) {
      double s = 0.0;
      for (int y = 0; y < 8; ++y) s += b[v][y] * rows[y * 8 + u];
      out[v * 8 + u] = s;
    }
  }
  return out;
}

/// AC energy over DC energy, each summed across all complete 8x8 blocks.
inline double focus_dct(const Image& img) {
  double ac = 0.0, dc = 0.0;
  for (int y0 = 0; y0 + 8 <= img.height; y0 += 8) {
    for (int x0 = 0; x0 + 8 <= img.width; x0 += 8) {
      const auto c = dct8x8(img, x0, y0);
      dc += c[0] * c[0];
      for (std::size_t k = 1; k < c.size(); ++k) ac += c[k] * c[k];
    }
  }
  if (ac == 0.0) return 0.0;
  return ac / (dc + 1e-12);
}

inline double frame_focus(const Image& img, FrameMeasure measure) {
  const int min_side = measure == FrameMeasure::dct ? 8 : 3;
  if (img.width < min_side || img.height < min_side) {
    throw InvalidArgument("frame smaller than the " + std::string(to_string(measure)) + " kernel");
  }
  if (!img.all_finite()) throw InvalidArgument("frame contains non-finite values");
  switch (measure) {
    case FrameMeasure::grad: return focus_grad(img);
    case FrameMeasure::sml: return focus_sml(img);
    case FrameMeasure::variance: return focus_local_variance(img);
    case FrameMeasure::dct: return focus_dct(img);
  }
  return 0.0;
}

inline double frame_focus(const ReconFrame& frame, FrameMeasure measure) {
  return frame_focus(frame.log_intensity, measure);
}

}  // namespace evaf
