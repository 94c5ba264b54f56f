#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <fftw3.h>
#include <json.hpp>

#include "evaf/event.hpp"
#include "evaf/image.hpp"
#include "evaf/io.hpp"
#include "evaf/parallel.hpp"

namespace evaf {

// ---------------------------------------------------------------------------
// Lens

/// Image distance from the thin-lens equation 1/d_o + 1/d_i = 1/f.
inline double thin_lens_image_distance(double f, double d_o) {
  if (!(f > 0.0)) throw InvalidArgument("focal length must be positive");
  if (!(d_o > f)) throw InvalidArgument("object distance must exceed the focal length (no real image)");
  return 1.0 / (1.0 / f - 1.0 / d_o);
}

struct LensModel {
  double focal_length = 0.05;
  double object_distance = 1.0;
  double k_blur = 0.02;  // blur radius in pixels per focal-position unit of error

  void validate() const {
    thin_lens_image_distance(focal_length, object_distance);
    if (!(k_blur >= 0.0)) throw InvalidArgument("k_blur must be non-negative");
  }

  double image_distance() const { return thin_lens_image_distance(focal_length, object_distance); }
};

// ---------------------------------------------------------------------------
// Scene

struct SceneSpec {
  Image texture;           // linear intensity, strictly positive
  double vx = 0.0;         // global translation, pixels per second
  double vy = 0.0;
  double noise_rate = 0.0;  // background events per pixel per second
  double noise_positive_fraction = 0.5;  // 1.0 gives unipolar positive noise
  double contrast_threshold = 0.2;
  std::uint64_t seed = 1;

  bool is_static() const { return vx == 0.0 && vy == 0.0; }

  void validate() const {
    if (texture.empty()) throw InvalidArgument("scene texture is empty");
    for (double v : texture.data) {
      if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("texture intensity must be finite and positive");
    }
    if (!(noise_rate >= 0.0)) throw InvalidArgument("noise_rate must be non-negative");
    if (!(noise_positive_fraction >= 0.0 && noise_positive_fraction <= 1.0)) {
      throw InvalidArgument("noise_positive_fraction must lie in [0, 1]");
    }
    if (!(contrast_threshold > 0.0)) throw InvalidArgument("contrast threshold must be positive");
  }
};

struct GroundTruth {
  Timestamp t_star = 0;
  double p_star = 0.0;
  std::vector<std::pair<Timestamp, double>> blur_radius_curve;  // (t, r(t)) samples
};

/// r(t) = k_blur * |p(t) - p_star|.
inline double blur_radius(const SweepConfig& sweep, const LensModel& lens, const GroundTruth& truth, double t) {
  const double tc = std::clamp(t, static_cast<double>(sweep.t_start), static_cast<double>(sweep.t_end));
  return lens.k_blur * std::abs(time_to_position(sweep, tc) - truth.p_star);
}

inline GroundTruth make_ground_truth(const SweepConfig& sweep, const LensModel& lens, double truth_fraction = 0.5,
                                     int curve_samples = 101) {
  if (!(truth_fraction >= 0.0 && truth_fraction <= 1.0)) throw InvalidArgument("truth_fraction must lie in [0, 1]");
  GroundTruth g;
  g.t_star = sweep.t_start + static_cast<Timestamp>(std::floor(truth_fraction * sweep.duration() + 0.5));
  g.p_star = time_to_position(sweep, static_cast<double>(g.t_star));
  for (int i = 0; i < curve_samples; ++i) {
    const Timestamp t = sweep.t_start + sweep.duration() * i / (curve_samples - 1);
    g.blur_radius_curve.emplace_back(t, blur_radius(sweep, lens, g, static_cast<double>(t)));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Textures

/// Intensity levels spanned by a texture of the given contrast in (0, 1].
inline std::pair<double, double> texture_levels(double contrast) {
  if (!(contrast > 0.0 && contrast <= 1.0)) throw InvalidArgument("texture contrast must lie in (0, 1]");
  return {1.0 - 0.95 * contrast, 1.0};
}

inline Image make_constant_texture(int w, int h, double level = 0.5) { return Image(w, h, level); }

inline Image make_checkerboard(int w, int h, int square = 16, double contrast = 0.9) {
  const auto [lo, hi] = texture_levels(contrast);
  Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img.at(x, y) = ((x / square + y / square) % 2) ? hi : lo;
  }
  return img;
}

inline Image make_stripes(int w, int h, int period = 16, double contrast = 0.9) {
  const auto [lo, hi] = texture_levels(contrast);
  Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img.at(x, y) = (x % period) < period / 2 ? hi : lo;
  }
  return img;
}

/// Log-linear ramp along x: log I = gradient * x.
inline Image make_log_ramp(int w, int h, double gradient) {
  Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img.at(x, y) = std::exp(gradient * x);
  }
  return img;
}

/*
 * Dead-leaves texture: overlapping discs and rectangles with power-law sizes
 * and random grey levels. Gives sharp edges at many scales, which is what a
 * defocus sweep needs to see.
 */
inline Image make_natural(int w, int h, double contrast = 0.9, std::uint64_t seed = 1) {
  const auto [lo, hi] = texture_levels(contrast);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Image img(w, h, 0.5 * (lo + hi));
  const double rmin = 2.0;
  const double rmax = std::max(4.0, std::min(w, h) / 4.0);
  const int shapes = std::max(16, w * h / 60);
  for (int s = 0; s < shapes; ++s) {
    // p(r) ~ r^-3 between rmin and rmax
    const double u = unit(rng);
    const double r = 1.0 / std::sqrt(1.0 / (rmin * rmin) - u * (1.0 / (rmin * rmin) - 1.0 / (rmax * rmax)));
    const double cx = unit(rng) * w;
    const double cy = unit(rng) * h;
    const double level = lo + unit(rng) * (hi - lo);
    const bool disc = unit(rng) < 0.6;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(cx + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cy + r)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - cx;
        const double dy = y + 0.5 - cy;
        if (!disc || dx * dx + dy * dy <= r * r) img.at(x, y) = level;
      }
    }
  }
  return img;
}

struct TextureSpec {
  std::string source = "natural";  // builtin name or PGM path
  int width = 128;
  int height = 128;
  double contrast = 0.9;
  int scale = 16;         // checkerboard square / stripe period
  double gradient = 0.1;  // ramp only
  std::optional<std::uint64_t> seed;
};

inline Image make_texture(const TextureSpec& t, std::uint64_t fallback_seed = 1,
                          const std::filesystem::path& base_dir = {}) {
  if (t.source == "natural") return make_natural(t.width, t.height, t.contrast, t.seed.value_or(fallback_seed));
  if (t.source == "checkerboard") return make_checkerboard(t.width, t.height, t.scale, t.contrast);
  if (t.source == "stripes") return make_stripes(t.width, t.height, t.scale, t.contrast);
  if (t.source == "constant") return make_constant_texture(t.width, t.height);
  if (t.source == "ramp") return make_log_ramp(t.width, t.height, t.gradient);
  std::filesystem::path p = t.source;
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  return read_pgm(p);
}

// ---------------------------------------------------------------------------
// Disc blur

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

struct FftwPlanDestroy {
  void operator()(fftw_plan p) const {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};

inline int next_fast_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int f : {2, 3, 5, 7}) {
      while (r % f == 0) r /= f;
    }
    if (r == 1) return m;
  }
}

}  // namespace detail

/// Normalised disc kernel weight with a one-pixel anti-aliased rim:
/// w(d) = clamp(r + 0.5 - d, 0, 1). For r < 0.5 only the centre tap survives.
inline double disc_weight(double r, double d) { return std::clamp(r + 0.5 - d, 0.0, 1.0); }

/*
 * Convolution of a fixed-size image with disc kernels of varying radius,
 * replicate boundary. The source is padded by the largest radius and its
 * spectrum cached, so each blur costs one kernel transform and one inverse.
 */
class DiscBlur {
 public:
  DiscBlur(int width, int height, double max_radius)
      : w_(width), h_(height), pad_(static_cast<int>(std::ceil(std::max(0.0, max_radius) + 0.5)) + 1) {
    if (width <= 0 || height <= 0) throw InvalidArgument("blur dimensions must be positive");
    pw_ = detail::next_fast_size(w_ + 2 * pad_);
    ph_ = detail::next_fast_size(h_ + 2 * pad_);
    const std::size_t nreal = static_cast<std::size_t>(pw_) * static_cast<std::size_t>(ph_);
    const std::size_t ncplx = static_cast<std::size_t>(ph_) * static_cast<std::size_t>(pw_ / 2 + 1);
    real_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * nreal)));
    spec_.reset(static_cast<std::complex<double>*>(fftw_malloc(sizeof(fftw_complex) * ncplx)));
    src_spec_.reset(static_cast<std::complex<double>*>(fftw_malloc(sizeof(fftw_complex) * ncplx)));
    if (!real_ || !spec_ || !src_spec_) throw std::bad_alloc();
    std::lock_guard lock(detail::fftw_planner_mutex());
    // FFTW_ESTIMATE keeps plans (and hence results) reproducible run to run.
    forward_.reset(fftw_plan_dft_r2c_2d(ph_, pw_, real_.get(), as_fftw(spec_.get()), FFTW_ESTIMATE));
    inverse_.reset(fftw_plan_dft_c2r_2d(ph_, pw_, as_fftw(spec_.get()), real_.get(), FFTW_ESTIMATE));
  }

  int max_radius_supported() const { return pad_ - 1; }

  void set_source(const Image& src) {
    if (src.width != w_ || src.height != h_) throw InvalidArgument("blur source has the wrong size");
    source_ = src;
    for (int y = 0; y < ph_; ++y) {
      for (int x = 0; x < pw_; ++x) real_[idx(x, y)] = src.clamped(x - pad_, y - pad_);
    }
    fftw_execute(forward_.get());
    std::copy(spec_.get(), spec_.get() + complex_size(), src_spec_.get());
  }

  /// Blurred copy of the current source with disc radius r.
  Image blur(double r) {
    if (r < 0.5) return source_;
    const int support = static_cast<int>(std::ceil(r + 0.5));
    if (support >= pad_) throw InvalidArgument("blur radius exceeds the configured maximum");

    std::fill(real_.get(), real_.get() + real_size(), 0.0);
    double norm = 0.0;
    for (int j = -support; j <= support; ++j) {
      for (int i = -support; i <= support; ++i) {
        const double wgt = disc_weight(r, std::hypot(static_cast<double>(i), static_cast<double>(j)));
        if (wgt <= 0.0) continue;
        real_[idx((i + pw_) % pw_, (j + ph_) % ph_)] = wgt;
        norm += wgt;
      }
    }
    fftw_execute(forward_.get());
    const double scale = 1.0 / (norm * static_cast<double>(real_size()));
    for (std::size_t k = 0; k < complex_size(); ++k) spec_[k] *= src_spec_[k] * scale;
    fftw_execute(inverse_.get());
    Image out(w_, h_);
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) out.at(x, y) = real_[idx(x + pad_, y + pad_)];
    }
    return out;
  }

 private:
  // std::complex<double> is layout-compatible with fftw_complex.
  static fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

  std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(pw_) + static_cast<std::size_t>(x);
  }
  std::size_t real_size() const { return static_cast<std::size_t>(pw_) * static_cast<std::size_t>(ph_); }
  std::size_t complex_size() const { return static_cast<std::size_t>(ph_) * static_cast<std::size_t>(pw_ / 2 + 1); }

  int w_, h_, pad_;
  int pw_ = 0, ph_ = 0;
  Image source_;
  std::unique_ptr<double[], detail::FftwFree> real_;
  std::unique_ptr<std::complex<double>[], detail::FftwFree> spec_;
  std::unique_ptr<std::complex<double>[], detail::FftwFree> src_spec_;
  std::unique_ptr<std::remove_pointer_t<fftw_plan>, detail::FftwPlanDestroy> forward_;
  std::unique_ptr<std::remove_pointer_t<fftw_plan>, detail::FftwPlanDestroy> inverse_;
};

/// Direct-sum reference for DiscBlur (O(r^2) per pixel).
inline Image disc_blur_direct(const Image& src, double r) {
  if (r < 0.5) return src;
  const int support = static_cast<int>(std::ceil(r + 0.5));
  Image out(src.width, src.height);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      double acc = 0.0, norm = 0.0;
      for (int j = -support; j <= support; ++j) {
        for (int i = -support; i <= support; ++i) {
          const double wgt = disc_weight(r, std::hypot(static_cast<double>(i), static_cast<double>(j)));
          if (wgt <= 0.0) continue;
          acc += wgt * src.clamped(x + i, y + j);
          norm += wgt;
        }
      }
      out.at(x, y) = acc / norm;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

/// Texture translated by (dx, dy) pixels; bilinear sampling, replicate boundary.
inline Image translate_bilinear(const Image& tex, double dx, double dy) {
  if (dx == 0.0 && dy == 0.0) return tex;
  Image out(tex.width, tex.height);
  for (int y = 0; y < tex.height; ++y) {
    const double sy = std::clamp(y - dy, 0.0, static_cast<double>(tex.height - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, tex.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < tex.width; ++x) {
      const double sx = std::clamp(x - dx, 0.0, static_cast<double>(tex.width - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, tex.width - 1);
      const double fx = sx - x0;
      const double top = (1.0 - fx) * tex.at(x0, y0) + fx * tex.at(x1, y0);
      const double bot = (1.0 - fx) * tex.at(x0, y1) + fx * tex.at(x1, y1);
      out.at(x, y) = (1.0 - fy) * top + fy * bot;
    }
  }
  return out;
}

/*
 * Renders the log intensity seen by the sensor at time t: the texture is
 * translated by the scene motion, blurred in linear intensity by a disc of
 * radius r(t), then logged.
 */
class DefocusRenderer {
 public:
  DefocusRenderer(const SceneSpec& scene, const SweepConfig& sweep, const LensModel& lens, const GroundTruth& truth)
      : scene_(&scene),
        sweep_(sweep),
        lens_(lens),
        truth_(truth),
        blur_(scene.texture.width, scene.texture.height,
              std::max(blur_radius(sweep, lens, truth, static_cast<double>(sweep.t_start)),
                       blur_radius(sweep, lens, truth, static_cast<double>(sweep.t_end)))) {
    if (scene.is_static()) blur_.set_source(scene.texture);
  }

  double radius(double t) const { return blur_radius(sweep_, lens_, truth_, t); }

  /// Linear intensity at t (fractional microseconds).
  Image intensity(double t) {
    if (!scene_->is_static()) {
      const double s = us_to_seconds(t - static_cast<double>(sweep_.t_start));
      blur_.set_source(translate_bilinear(scene_->texture, scene_->vx * s, scene_->vy * s));
    }
    Image img = blur_.blur(radius(t));
    for (double& v : img.data) v = std::max(v, 1e-12);
    return img;
  }

  Image log_intensity(double t) {
    Image img = intensity(t);
    for (double& v : img.data) v = std::log(v);
    return img;
  }

 private:
  const SceneSpec* scene_;
  SweepConfig sweep_;
  LensModel lens_;
  GroundTruth truth_;
  DiscBlur blur_;
};

inline Image render_defocused(const SceneSpec& scene, Timestamp t, const SweepConfig& sweep, const GroundTruth& truth,
                              const LensModel& lens) {
  if (t < sweep.t_start || t > sweep.t_end) throw InvalidArgument("render time outside sweep");
  DefocusRenderer renderer(scene, sweep, lens, truth);
  return renderer.log_intensity(static_cast<double>(t));
}

// ---------------------------------------------------------------------------
// Event generation

struct SimResult {
  EventStream stream;
  GroundTruth truth;
  std::size_t signal_events = 0;
  std::size_t noise_events = 0;
  std::size_t fast_steps = 0;  // steps whose per-pixel log change reached 4C
  std::vector<std::string> warnings;
};

/*
 * Simulates an ideal event pixel array watching the scene during a linear lens
 * sweep. Each pixel keeps a reference log intensity; whenever the rendered log
 * intensity moves C or more away from it, an event fires with the crossing
 * time interpolated inside the simulation step and the reference moves by
 * p * C. Background noise is a homogeneous Poisson process per pixel.
 */
inline SimResult generate_sweep_events(const SceneSpec& scene, const SweepConfig& sweep, const LensModel& lens,
                                       double sim_rate = 1000.0, double truth_fraction = 0.5) {
  if (!(sim_rate > 0.0)) throw InvalidArgument("sim_rate must be positive");
  scene.validate();
  sweep.validate();
  lens.validate();

  SimResult res;
  res.truth = make_ground_truth(sweep, lens, truth_fraction);
  const int w = scene.texture.width;
  const int h = scene.texture.height;
  EventStream& out = res.stream;
  out.width = w;
  out.height = h;
  out.sweep = sweep;

  const double duration_s = us_to_seconds(static_cast<double>(sweep.duration()));
  const auto steps = std::max<std::int64_t>(1, std::llround(duration_s * sim_rate));
  const double step_us = static_cast<double>(sweep.duration()) / static_cast<double>(steps);
  const double c = scene.contrast_threshold;
  const auto t_end = static_cast<double>(sweep.t_end);

  DefocusRenderer renderer(scene, sweep, lens, res.truth);
  Image prev = renderer.log_intensity(static_cast<double>(sweep.t_start));
  std::vector<double> ref = prev.data;
  std::vector<Event>& events = out.events;

  double t_prev = static_cast<double>(sweep.t_start);
  for (std::int64_t i = 1; i <= steps; ++i) {
    const double t_cur = i == steps ? t_end : static_cast<double>(sweep.t_start) + static_cast<double>(i) * step_us;
    const Image cur = renderer.log_intensity(t_cur);
    double max_change = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t k = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
        const double lp = prev.data[k];
        const double lc = cur.data[k];
        max_change = std::max(max_change, std::abs(lc - lp));
        double& r = ref[k];
        while (std::abs(lc - r) >= c) {
          const std::int8_t pol = lc > r ? 1 : -1;
          const double level = r + pol * c;
          const double frac = std::clamp((level - lp) / (lc - lp), 0.0, 1.0);
          const double tc = std::ceil(t_prev + frac * (t_cur - t_prev));
          events.push_back({static_cast<Timestamp>(std::min(tc, t_end)), x, y, pol});
          r = level;
        }
      }
    }
    if (max_change >= 4.0 * c) ++res.fast_steps;
    prev = cur;
    t_prev = t_cur;
  }
  res.signal_events = events.size();
  if (res.fast_steps > 0) {
    res.warnings.push_back(std::to_string(res.fast_steps) +
                           " simulation steps changed some pixel by >= 4C; raise sim_rate");
  }

  if (scene.noise_rate > 0.0) {
    std::mt19937_64 rng(scene.seed);
    const double mean = scene.noise_rate * static_cast<double>(w) * static_cast<double>(h) * duration_s;
    std::poisson_distribution<std::int64_t> count(mean);
    std::uniform_int_distribution<std::int32_t> px(0, w - 1);
    std::uniform_int_distribution<std::int32_t> py(0, h - 1);
    std::uniform_int_distribution<Timestamp> pt(sweep.t_start, sweep.t_end);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::int64_t n = count(rng);
    events.reserve(events.size() + static_cast<std::size_t>(n));
    for (std::int64_t k = 0; k < n; ++k) {
      const std::int32_t x = px(rng);
      const std::int32_t y = py(rng);
      const Timestamp t = pt(rng);
      const std::int8_t pol = unit(rng) < scene.noise_positive_fraction ? 1 : -1;
      events.push_back({t, x, y, pol});
    }
    res.noise_events = static_cast<std::size_t>(n);
  }

  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  return res;
}

// ---------------------------------------------------------------------------
// Sequence specs and datasets

/// One sequence to simulate; mirrors the JSON spec accepted by `evaf simulate`.
struct SequenceSpec {
  std::string id = "seq";
  std::string condition = "static-light";
  TextureSpec texture;
  SceneSpec scene;  // texture member is filled from `texture` when built
  SweepConfig sweep;
  LensModel lens;
  double sim_rate = 1000.0;
  double truth_fraction = 0.5;
};

inline SequenceSpec sequence_spec_from_json(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir = {}) {
  SequenceSpec s;
  try {
    s.id = j.value("id", s.id);
    s.condition = j.value("condition", s.condition);
    s.sim_rate = j.value("sim_rate", s.sim_rate);
    s.truth_fraction = j.value("truth_fraction", s.truth_fraction);
    const auto scene = j.value("scene", nlohmann::ordered_json::object());
    s.texture.source = scene.value("texture", s.texture.source);
    s.texture.width = scene.value("width", s.texture.width);
    s.texture.height = scene.value("height", s.texture.height);
    s.texture.contrast = scene.value("texture_contrast", s.texture.contrast);
    s.texture.scale = scene.value("texture_scale", s.texture.scale);
    s.texture.gradient = scene.value("texture_gradient", s.texture.gradient);
    if (scene.contains("texture_seed")) s.texture.seed = scene["texture_seed"].get<std::uint64_t>();
    if (scene.contains("motion_velocity")) {
      const auto& v = scene["motion_velocity"];
      s.scene.vx = v.at(0).get<double>();
      s.scene.vy = v.at(1).get<double>();
    }
    s.scene.noise_rate = scene.value("noise_rate", s.scene.noise_rate);
    s.scene.noise_positive_fraction = scene.value("noise_positive_fraction", s.scene.noise_positive_fraction);
    s.scene.contrast_threshold = scene.value("contrast_threshold", s.scene.contrast_threshold);
    s.scene.seed = scene.value("seed", s.scene.seed);
    const auto sweep = j.value("sweep", nlohmann::ordered_json::object());
    s.sweep.t_start = sweep.value("t_start", s.sweep.t_start);
    s.sweep.t_end = sweep.value("t_end", s.sweep.t_end);
    s.sweep.p_min = sweep.value("p_min", s.sweep.p_min);
    s.sweep.p_max = sweep.value("p_max", s.sweep.p_max);
    const auto lens = j.value("lens", nlohmann::ordered_json::object());
    s.lens.focal_length = lens.value("focal_length", s.lens.focal_length);
    s.lens.object_distance = lens.value("object_distance", s.lens.object_distance);
    s.lens.k_blur = lens.value("k_blur", s.lens.k_blur);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("simulation spec: ") + e.what());
  }
  if (!(s.sim_rate > 0.0)) throw InvalidArgument("simulation spec: sim_rate must be positive");
  if (!(s.truth_fraction >= 0.0 && s.truth_fraction <= 1.0)) {
    throw InvalidArgument("simulation spec: truth_fraction must lie in [0, 1]");
  }
  if (s.texture.width <= 0 || s.texture.height <= 0) throw InvalidArgument("simulation spec: bad texture size");
  s.sweep.validate();
  s.lens.validate();
  s.scene.texture = make_texture(s.texture, s.scene.seed, base_dir);
  s.scene.validate();
  return s;
}

inline nlohmann::ordered_json sequence_spec_to_json(const SequenceSpec& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["condition"] = s.condition;
  nlohmann::ordered_json scene;
  scene["texture"] = s.texture.source;
  scene["width"] = s.texture.width;
  scene["height"] = s.texture.height;
  scene["texture_contrast"] = s.texture.contrast;
  scene["texture_scale"] = s.texture.scale;
  scene["texture_gradient"] = s.texture.gradient;
  if (s.texture.seed) scene["texture_seed"] = *s.texture.seed;
  scene["motion_velocity"] = {s.scene.vx, s.scene.vy};
  scene["noise_rate"] = s.scene.noise_rate;
  scene["noise_positive_fraction"] = s.scene.noise_positive_fraction;
  scene["contrast_threshold"] = s.scene.contrast_threshold;
  scene["seed"] = s.scene.seed;
  j["scene"] = scene;
  j["sweep"] = {{"t_start", s.sweep.t_start}, {"t_end", s.sweep.t_end}, {"p_min", s.sweep.p_min},
                {"p_max", s.sweep.p_max}};
  j["lens"] = {{"focal_length", s.lens.focal_length},
               {"object_distance", s.lens.object_distance},
               {"k_blur", s.lens.k_blur}};
  j["sim_rate"] = s.sim_rate;
  j["truth_fraction"] = s.truth_fraction;
  return j;
}

/// Accepts either {"sequences": [...]} or a single sequence object.
inline std::vector<SequenceSpec> sequence_specs_from_json(const nlohmann::ordered_json& j,
                                                          const std::filesystem::path& base_dir = {}) {
  std::vector<SequenceSpec> out;
  if (j.contains("sequences")) {
    for (const auto& item : j["sequences"]) out.push_back(sequence_spec_from_json(item, base_dir));
  } else {
    out.push_back(sequence_spec_from_json(j, base_dir));
  }
  return out;
}

/*
 * The default benchmark suite: four lighting x motion condition classes, one
 * sequence per class and seed. Dark classes have low texture contrast and a
 * high background noise rate; dynamic classes translate the scene. Simulated
 * at 250 steps/s: the per-step blur change stays far below a pixel at
 * k_blur 0.02, and the whole suite fits a single-core time budget.
 */
inline std::vector<SequenceSpec> default_suite(int seeds = 5, int size = 128, double sim_rate = 250.0) {
  static constexpr double kTruthFractions[] = {0.5, 0.42, 0.58, 0.37, 0.63, 0.46, 0.54};
  struct Condition {
    const char* name;
    double contrast;
    double noise_rate;
    double vx, vy;
  };
  static constexpr Condition kConditions[] = {
      {"static-light", 0.9, 0.02, 0.0, 0.0},
      {"static-dark", 0.4, 0.2, 0.0, 0.0},
      {"dynamic-light", 0.9, 0.02, 3.0, 1.5},
      {"dynamic-dark", 0.4, 0.2, 3.0, 1.5},
  };
  std::vector<SequenceSpec> out;
  for (const Condition& cond : kConditions) {
    for (int s = 0; s < seeds; ++s) {
      SequenceSpec spec;
      spec.id = std::string(cond.name) + "-s" + std::to_string(s + 1);
      spec.condition = cond.name;
      spec.texture.source = "natural";
      spec.texture.width = size;
      spec.texture.height = size;
      spec.texture.contrast = cond.contrast;
      spec.scene.seed = static_cast<std::uint64_t>(1000 + s);
      spec.texture.seed = spec.scene.seed;
      spec.scene.noise_rate = cond.noise_rate;
      spec.scene.vx = cond.vx;
      spec.scene.vy = cond.vy;
      spec.truth_fraction = kTruthFractions[s % std::size(kTruthFractions)];
      spec.sim_rate = sim_rate;
      spec.scene.texture = make_texture(spec.texture, spec.scene.seed);
      out.push_back(std::move(spec));
    }
  }
  return out;
}

inline nlohmann::ordered_json sim_meta_extra(const SequenceSpec& spec, const SimResult& res) {
  nlohmann::ordered_json j;
  j["condition"] = spec.condition;
  j["seed"] = spec.scene.seed;
  j["signal_events"] = res.signal_events;
  j["noise_events"] = res.noise_events;
  j["image_distance"] = spec.lens.image_distance();
  j["k_blur"] = spec.lens.k_blur;
  j["contrast_threshold"] = spec.scene.contrast_threshold;
  j["warnings"] = res.warnings;
  return j;
}

inline SimResult simulate_sequence(const SequenceSpec& spec) {
  return generate_sweep_events(spec.scene, spec.sweep, spec.lens, spec.sim_rate, spec.truth_fraction);
}

/// Writes `<id>.csv` + `<id>.json` per spec and `manifest.json`; returns the manifest.
inline nlohmann::ordered_json make_dataset(const std::vector<SequenceSpec>& specs, const std::filesystem::path& out_dir,
                                           std::vector<std::string>* warnings = nullptr) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::vector<std::string>> seq_warnings(specs.size());
  parallel_for(specs.size(), [&](std::size_t i) {
    const SequenceSpec& spec = specs[i];
    SimResult res = simulate_sequence(spec);
    SequenceMeta meta;
    meta.width = res.stream.width;
    meta.height = res.stream.height;
    meta.sweep = res.stream.sweep;
    meta.ground_truth_position = res.truth.p_star;
    meta.ground_truth_time = res.truth.t_star;
    meta.extra = sim_meta_extra(spec, res);
    save_sequence(out_dir / (spec.id + ".csv"), res.stream, meta);
    for (const auto& w : res.warnings) seq_warnings[i].push_back(spec.id + ": " + w);
  });

  nlohmann::ordered_json manifest;
  manifest["format"] = "evaf-manifest v1";
  manifest["sequences"] = nlohmann::ordered_json::array();
  for (const SequenceSpec& spec : specs) {
    manifest["sequences"].push_back({{"id", spec.id},
                                     {"condition", spec.condition},
                                     {"events", spec.id + ".csv"},
                                     {"metadata", spec.id + ".json"}});
  }
  detail::write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  if (warnings) {
    for (auto& ws : seq_warnings) warnings->insert(warnings->end(), ws.begin(), ws.end());
  }
  return manifest;
}

}  // namespace evaf
