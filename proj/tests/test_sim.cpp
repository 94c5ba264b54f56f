#include <gtest/gtest.h>

#include <cmath>

#include "evaf/frame.hpp"
#include "evaf/measure.hpp"
#include "evaf/sim.hpp"
#include "test_util.hpp"

using namespace evaf;
using evaf::testing::slurp;
using evaf::testing::TempDir;

namespace {

SequenceSpec small_spec(const std::string& id, double noise, double contrast, double vx = 0.0) {
  SequenceSpec s;
  s.id = id;
  s.condition = id;
  s.texture.width = s.texture.height = 48;
  s.texture.contrast = contrast;
  s.texture.seed = 21;
  s.scene.texture = make_texture(s.texture);
  s.scene.noise_rate = noise;
  s.scene.vx = vx;
  s.scene.vy = vx / 2;
  s.scene.seed = 21;
  s.sweep = {0, 4'000'000, 220.0, 3750.0};
  s.sim_rate = 250.0;
  return s;
}

}  // namespace

// lens ------------------------------------------------------------------------------

TEST(ThinLens, Examples) {
  EXPECT_NEAR(thin_lens_image_distance(0.1, 0.2), 0.2, 1e-12);
  EXPECT_NEAR(thin_lens_image_distance(7.5, 1e6), 7.5, 7.5e-4);
  EXPECT_NEAR(thin_lens_image_distance(0.05, 0.075), 0.15, 1e-12);
}

TEST(ThinLens, NoRealImage) {
  EXPECT_THROW(thin_lens_image_distance(0.1, 0.1), InvalidArgument);
  EXPECT_THROW(thin_lens_image_distance(0.1, 0.05), InvalidArgument);
  EXPECT_THROW(thin_lens_image_distance(0.0, 1.0), InvalidArgument);
  EXPECT_THROW((LensModel{0.1, 0.1, 0.02}.validate()), InvalidArgument);
}

TEST(GroundTruth, RadiusZeroAtFocusAndGrowsAway) {
  const SweepConfig sw;
  LensModel lens;
  for (double frac : {0.5, 0.3, 0.77}) {
    const GroundTruth g = make_ground_truth(sw, lens, frac);
    EXPECT_EQ(g.t_star, static_cast<Timestamp>(frac * 1e7 + 0.5));
    EXPECT_EQ(blur_radius(sw, lens, g, static_cast<double>(g.t_star)), 0.0);
    ASSERT_EQ(g.blur_radius_curve.size(), 101u);
    for (std::size_t i = 1; i < g.blur_radius_curve.size(); ++i) {
      const auto [t0, r0] = g.blur_radius_curve[i - 1];
      const auto [t1, r1] = g.blur_radius_curve[i];
      if (t1 <= g.t_star) {
        EXPECT_LT(r1, r0);
      }
      if (t0 >= g.t_star) {
        EXPECT_GT(r1, r0);
      }
    }
  }
  EXPECT_THROW(make_ground_truth(sw, lens, 1.5), InvalidArgument);
}

// blur and rendering ------------------------------------------------------------------

TEST(DiscBlur, FftMatchesDirectSum) {
  const Image tex = make_natural(40, 32, 0.9, 3);
  DiscBlur blur(40, 32, 9.0);
  blur.set_source(tex);
  for (double r : {0.6, 1.0, 2.3, 4.5, 9.0}) {
    const Image a = blur.blur(r);
    const Image b = disc_blur_direct(tex, r);
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a.data[i], b.data[i], 1e-10) << r;
  }
  EXPECT_THROW(blur.blur(20.0), InvalidArgument);
}

TEST(DiscBlur, SubPixelRadiusIsIdentityAndConstantsPreserved) {
  const Image tex = make_checkerboard(16, 16, 4, 0.9);
  DiscBlur blur(16, 16, 5.0);
  blur.set_source(tex);
  EXPECT_EQ(blur.blur(0.0), tex);
  EXPECT_EQ(blur.blur(0.49), tex);
  DiscBlur flat(16, 16, 5.0);
  flat.set_source(Image(16, 16, 0.3));
  for (double v : flat.blur(4.2).data) EXPECT_NEAR(v, 0.3, 1e-12);
}

TEST(DiscWeight, AntiAliasedEdge) {
  EXPECT_EQ(disc_weight(3.0, 0.0), 1.0);
  EXPECT_EQ(disc_weight(3.0, 2.5), 1.0);
  EXPECT_DOUBLE_EQ(disc_weight(3.0, 3.25), 0.25);
  EXPECT_EQ(disc_weight(3.0, 3.5), 0.0);
}

TEST(Render, InFocusEqualsLogOfSharpTexture) {
  SceneSpec scene;
  scene.texture = make_natural(32, 32, 0.9, 9);
  const SweepConfig sw;
  const LensModel lens;
  const GroundTruth g = make_ground_truth(sw, lens, 0.5);
  const Image out = render_defocused(scene, g.t_star, sw, g, lens);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out.data[i], std::log(scene.texture.data[i]));

  scene.vx = 2.0;
  scene.vy = -1.0;
  const Image moved = render_defocused(scene, g.t_star, sw, g, lens);
  const Image expected = translate_bilinear(scene.texture, 10.0, -5.0);
  for (std::size_t i = 0; i < moved.size(); ++i) EXPECT_NEAR(moved.data[i], std::log(expected.data[i]), 1e-12);
}

TEST(Render, ConstantTextureStaysConstant) {
  SceneSpec scene;
  scene.texture = make_constant_texture(20, 20, 0.4);
  const SweepConfig sw;
  const LensModel lens;
  const GroundTruth g = make_ground_truth(sw, lens);
  for (Timestamp t : {Timestamp{0}, Timestamp{2'500'000}, sw.t_end}) {
    for (double v : render_defocused(scene, t, sw, g, lens).data) EXPECT_NEAR(v, std::log(0.4), 1e-12);
  }
}

TEST(Render, BlurLowersGradFocus) {
  SceneSpec scene;
  scene.texture = make_checkerboard(64, 64, 8, 0.9);
  const SweepConfig sw;
  const LensModel lens;  // k_blur 0.02: r = 3 px at 150 units from focus
  const GroundTruth g = make_ground_truth(sw, lens);
  const auto t3 = static_cast<Timestamp>(position_to_time(sw, g.p_star + 150.0) + 0.5);
  EXPECT_NEAR(blur_radius(sw, lens, g, static_cast<double>(t3)), 3.0, 1e-3);
  EXPECT_LT(frame_focus(render_defocused(scene, t3, sw, g, lens), FrameMeasure::grad),
            frame_focus(render_defocused(scene, g.t_star, sw, g, lens), FrameMeasure::grad));
}

TEST(Render, OutsideSweepRejected) {
  SceneSpec scene;
  scene.texture = make_constant_texture(8, 8);
  const SweepConfig sw;
  const GroundTruth g = make_ground_truth(sw, LensModel{});
  EXPECT_THROW(render_defocused(scene, -1, sw, g, LensModel{}), InvalidArgument);
}

TEST(Textures, PositiveAndWithinLevels) {
  for (const char* name : {"natural", "checkerboard", "stripes", "ramp", "constant"}) {
    TextureSpec t;
    t.source = name;
    t.width = 33;
    t.height = 17;
    t.contrast = 0.6;
    const Image img = make_texture(t, 4);
    EXPECT_EQ(img.width, 33);
    EXPECT_EQ(img.height, 17);
    for (double v : img.data) EXPECT_GT(v, 0.0) << name;
  }
  const auto [lo, hi] = texture_levels(0.6);
  for (double v : make_checkerboard(16, 16, 4, 0.6).data) EXPECT_TRUE(v == lo || v == hi);
  TextureSpec bad;
  bad.source = "no_such_texture";
  EXPECT_THROW(make_texture(bad), Error);
}

TEST(Textures, NaturalDeterministicPerSeed) {
  EXPECT_EQ(make_natural(32, 32, 0.9, 5), make_natural(32, 32, 0.9, 5));
  EXPECT_NE(make_natural(32, 32, 0.9, 5), make_natural(32, 32, 0.9, 6));
}

// generate_sweep_events -------------------------------------------------------------

TEST(Generate, ConstantSceneWithoutNoiseIsSilent) {
  SceneSpec scene;
  scene.texture = make_constant_texture(16, 16);
  const SimResult r = generate_sweep_events(scene, SweepConfig{}, LensModel{}, 200.0);
  EXPECT_TRUE(r.stream.empty());
}

TEST(Generate, NoiseCountIsPoisson) {
  SceneSpec scene;
  scene.texture = make_constant_texture(100, 100);
  scene.noise_rate = 1e-3;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    scene.seed = seed;
    const SimResult r = generate_sweep_events(scene, SweepConfig{}, LensModel{}, 10.0);
    EXPECT_EQ(r.signal_events, 0u);
    EXPECT_EQ(r.stream.size(), r.noise_events);
    EXPECT_GE(r.stream.size(), 70u);   // mean 100, sigma 10
    EXPECT_LE(r.stream.size(), 130u);
  }
}

TEST(Generate, NonPositiveRateRejected) {
  SceneSpec scene;
  scene.texture = make_constant_texture(4, 4);
  EXPECT_THROW(generate_sweep_events(scene, SweepConfig{}, LensModel{}, 0.0), InvalidArgument);
  EXPECT_THROW(generate_sweep_events(scene, SweepConfig{}, LensModel{}, -5.0), InvalidArgument);
}

TEST(Generate, StreamIsValidAndCanonicallyOrdered) {
  const SimResult r = simulate_sequence(small_spec("x", 0.5, 0.9, 2.0));
  ASSERT_FALSE(r.stream.empty());
  EXPECT_NO_THROW(r.stream.validate());
  for (std::size_t i = 1; i < r.stream.size(); ++i) {
    const Event& a = r.stream.events[i - 1];
    const Event& b = r.stream.events[i];
    EXPECT_TRUE(std::tie(a.t, a.y, a.x) <= std::tie(b.t, b.y, b.x));
  }
  EXPECT_EQ(r.signal_events + r.noise_events, r.stream.size());
}

TEST(Generate, StaticSweepPeaksNearTruth) {
  SequenceSpec s = small_spec("peak", 0.0, 0.9);
  s.sweep = SweepConfig{};
  s.truth_fraction = 0.6;
  const SimResult r = simulate_sequence(s);
  const PrefixIndex idx(r.stream);
  const FocusCurve c = focus_curve(idx, 100'000, 25'000);
  const Timestamp peak = c.samples[argmax_earliest(c)].t;
  EXPECT_LE(std::abs(peak - r.truth.t_star), 0.03 * 1e7);
}

TEST(Generate, LowRateWarns) {
  SceneSpec scene;
  scene.texture = make_checkerboard(32, 32, 4, 1.0);
  const SimResult r = generate_sweep_events(scene, SweepConfig{}, LensModel{}, 2.0);
  EXPECT_GT(r.fast_steps, 0u);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Generate, ReconstructionTracksLogIntensity) {
  SceneSpec scene;
  scene.texture = make_natural(40, 40, 0.9, 2);
  scene.vx = 1.5;
  const SweepConfig sw{0, 2'000'000, 220.0, 3750.0};
  const LensModel lens;
  const double rate = 500.0;  // steps land on whole microseconds
  const SimResult r = generate_sweep_events(scene, sw, lens, rate);
  const double c = scene.contrast_threshold;
  DefocusRenderer renderer(scene, sw, lens, r.truth);
  const Image l0 = renderer.log_intensity(0.0);
  const Image f0 = reconstruct_frame(r.stream, 0, 0.0, c).log_intensity;
  for (Timestamp t : {Timestamp{2000}, Timestamp{500'000}, Timestamp{1'000'000}, Timestamp{1'398'000}, sw.t_end}) {
    const Image lt = renderer.log_intensity(static_cast<double>(t));
    const Image ft = reconstruct_frame(r.stream, t, 0.0, c).log_intensity;
    double worst = 0.0;
    for (std::size_t i = 0; i < lt.size(); ++i) {
      worst = std::max(worst, std::abs((ft.data[i] - f0.data[i]) - (lt.data[i] - l0.data[i])));
    }
    EXPECT_LE(worst, c) << t;
  }
}

TEST(Generate, BreathingEventsAwayFromFocusNotAtIt) {
  // k_blur 0.002 keeps the 1 s window around focus inside the sub-pixel zone
  // while the sweep ends still see a few pixels of defocus change.
  SceneSpec scene;
  scene.texture = make_checkerboard(48, 48, 8, 0.9);
  LensModel lens;
  lens.k_blur = 0.002;
  const SweepConfig sw;
  const SimResult r = generate_sweep_events(scene, sw, lens, 250.0);
  const PrefixIndex idx(r.stream);
  const Duration w = 1'000'000;
  const std::size_t centre = idx.count_window(r.truth.t_star - w / 2, r.truth.t_star + w / 2);
  const std::size_t start = idx.count_window(sw.t_start, sw.t_start + w);
  const std::size_t end = idx.count_window(sw.t_end - w, sw.t_end);
  EXPECT_GT(idx.total(), 0u);
  EXPECT_LT(centre, start);
  EXPECT_LT(centre, end);
}

TEST(Generate, VelocityScalesEventRateOnRamp) {
  // constant log gradient g along x; a translation at v px/s changes each
  // interior pixel at g*v per second, giving g*v/C events per second
  const double g = 0.5, C = 0.1;
  std::vector<double> rates;
  for (double v : {1.0, 2.0, 4.0}) {
    SceneSpec scene;
    scene.texture = make_log_ramp(96, 8, g);
    scene.vx = v;
    scene.contrast_threshold = C;
    LensModel lens;
    lens.k_blur = 0.0;
    const SweepConfig sw{0, 8'000'000, 0.0, 1.0};
    const SimResult r = generate_sweep_events(scene, sw, lens, 100.0);
    const PrefixIndex idx(r.stream);
    double sum = 0.0;
    int n = 0;
    for (int y = 0; y < 8; ++y) {
      for (int x = 40; x < 96; ++x) {
        sum += er_rate(idx, {x, y}, 4'000'000, 6'000'000);
        ++n;
      }
    }
    rates.push_back(sum / n);
    EXPECT_NEAR(rates.back(), g * v / C, 0.1 * g * v / C) << v;
  }
  EXPECT_NEAR(rates[1] / rates[0], 2.0, 0.2);
  EXPECT_NEAR(rates[2] / rates[1], 2.0, 0.2);
}

// datasets ---------------------------------------------------------------------------

TEST(Dataset, FourSpecsWriteNineFiles) {
  TempDir dir("dataset");
  const std::vector<SequenceSpec> specs = {small_spec("static-light", 0.02, 0.9), small_spec("static-dark", 0.5, 0.4),
                                           small_spec("dynamic-light", 0.02, 0.9, 3.0),
                                           small_spec("dynamic-dark", 0.5, 0.4, 3.0)};
  const auto manifest = make_dataset(specs, dir.path());
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) files += e.is_regular_file();
  EXPECT_EQ(files, 9u);
  ASSERT_EQ(manifest.at("sequences").size(), 4u);
  EXPECT_EQ(manifest.at("sequences")[2].at("condition"), "dynamic-light");
  const LoadedSequence seq = load_sequence(dir / "static-dark.csv");
  ASSERT_TRUE(seq.meta.ground_truth_position.has_value());
  EXPECT_EQ(seq.meta.extra.at("condition"), "static-dark");
}

TEST(Dataset, DarkHasLargerNoiseFraction) {
  const SimResult light = simulate_sequence(small_spec("l", 0.02, 0.9));
  const SimResult dark = simulate_sequence(small_spec("d", 0.5, 0.4));
  const auto frac = [](const SimResult& r) {
    return static_cast<double>(r.noise_events) / static_cast<double>(r.stream.size());
  };
  EXPECT_GT(frac(dark), frac(light));
}

TEST(Dataset, MotionAddsEvents) {
  // Mild defocus: at k_blur 0.02 the disc reaches tens of pixels on a 48 px
  // frame and the replicate border swallows most of the translated texture.
  SequenceSpec still = small_spec("s", 0.0, 0.9);
  still.lens.k_blur = 0.002;
  for (double v : {1.0, 3.0}) {
    SequenceSpec moving = small_spec("m", 0.0, 0.9, v);
    moving.lens.k_blur = 0.002;
    EXPECT_GT(simulate_sequence(moving).stream.size(), simulate_sequence(still).stream.size()) << v;
  }
}

TEST(Dataset, SameSeedGivesIdenticalBytes) {
  TempDir a("det-a"), b("det-b");
  const std::vector<SequenceSpec> specs = {small_spec("one", 0.3, 0.9, 1.0), small_spec("two", 0.3, 0.5)};
  make_dataset(specs, a.path());
  make_dataset(specs, b.path());
  for (const char* f : {"one.csv", "one.json", "two.csv", "two.json", "manifest.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(SequenceSpecJson, RoundTrip) {
  SequenceSpec s = small_spec("rt", 0.25, 0.7, 1.5);
  s.lens.k_blur = 0.01;
  s.truth_fraction = 0.4;
  const SequenceSpec back = sequence_spec_from_json(sequence_spec_to_json(s));
  EXPECT_EQ(back.id, "rt");
  EXPECT_EQ(back.scene.texture, s.scene.texture);
  EXPECT_EQ(back.scene.noise_rate, 0.25);
  EXPECT_EQ(back.scene.vx, 1.5);
  EXPECT_EQ(back.sweep, s.sweep);
  EXPECT_EQ(back.lens.k_blur, 0.01);
  EXPECT_EQ(back.truth_fraction, 0.4);
  EXPECT_EQ(back.sim_rate, 250.0);
}

TEST(SequenceSpecJson, BadFieldsRejected) {
  EXPECT_THROW(sequence_spec_from_json(nlohmann::ordered_json::parse(R"({"scene": {"noise_rate": "lots"}})")), Error);
  EXPECT_THROW(sequence_spec_from_json(nlohmann::ordered_json::parse(R"({"sim_rate": 0})")), Error);
  EXPECT_THROW(sequence_spec_from_json(nlohmann::ordered_json::parse(R"({"lens": {"focal_length": 1, "object_distance": 0.5}})")),
               Error);
}

TEST(DefaultSuite, FourConditionsFiveSeeds) {
  const auto suite = default_suite(5, 16);
  ASSERT_EQ(suite.size(), 20u);
  std::map<std::string, int> per;
  for (const auto& s : suite) ++per[s.condition];
  EXPECT_EQ(per.size(), 4u);
  for (const auto& [c, n] : per) EXPECT_EQ(n, 5) << c;
  EXPECT_EQ(suite.front().id, "static-light-s1");
}
