#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "evaf/cli.hpp"
#include "test_util.hpp"

using namespace evaf;
using evaf::testing::slurp;
using evaf::testing::TempDir;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "evaf");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

SequenceSpec cli_spec(const std::string& id, double truth_fraction) {
  SequenceSpec s;
  s.id = id;
  s.condition = id.substr(0, 1);
  s.texture.width = s.texture.height = 40;
  s.texture.seed = 13;
  s.scene.texture = make_texture(s.texture);
  s.scene.seed = 13;
  s.scene.noise_rate = 0.05;
  s.sweep = {0, 4'000'000, 220.0, 3750.0};
  s.sim_rate = 250.0;
  s.truth_fraction = truth_fraction;
  return s;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    make_dataset({cli_spec("a1", 0.5), cli_spec("a2", 0.4), cli_spec("b1", 0.55), cli_spec("b2", 0.45)},
                 dir_->path() / "data");
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string data(const std::string& name) { return (dir_->path() / "data" / name).string(); }
  static TempDir* dir_;
};

TempDir* CliTest::dir_ = nullptr;

}  // namespace

TEST(Cli, Version) {
  const CliRun r = cli({"--version"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_EQ(r.out, "evaf 1.0.0 (events csv_v1, manifest v1, bench v1)\n");
}

TEST(Cli, NoSubcommandPrintsHelpAndFails) {
  const CliRun r = cli({});
  EXPECT_EQ(r.code, kExitBadInput);
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(r.err.find("focus"), std::string::npos);
}

TEST(Cli, UnknownOptionRejected) {
  EXPECT_NE(cli({"focus", "x.csv", "--bogus"}).code, kExitOk);
}

TEST_F(CliTest, FocusEgsWithinThreePercent) {
  const CliRun r = cli({"focus", data("a1.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["method"], "egs");
  EXPECT_EQ(j["iterations"], 15);
  const double truth = *read_sidecar(data("a1.json")).ground_truth_position;
  EXPECT_LE(std::abs(j["p_star"].get<double>() - truth), 0.03 * (3750.0 - 220.0));
  EXPECT_TRUE(r.err.empty());
}

TEST_F(CliTest, FocusNaiveMatchesCurveArgmax) {
  const CliRun f = cli({"focus", "--input", data("a2.csv"), "--method", "naive", "--dt", "0.055"});
  ASSERT_EQ(f.code, kExitOk) << f.err;
  const auto j = nlohmann::json::parse(f.out);
  EXPECT_EQ(j["method"], "naive");

  const CliRun c = cli({"curve", data("a2.csv"), "--dt", "0.055"});
  ASSERT_EQ(c.code, kExitOk) << c.err;
  std::istringstream in(c.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t_us,dt_us,score,variant");
  Timestamp best_t = 0;
  double best = -1.0;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string t, dt, score;
    std::getline(fields, t, ',');
    std::getline(fields, dt, ',');
    std::getline(fields, score, ',');
    EXPECT_EQ(dt, "55000");
    if (std::stod(score) > best) {
      best = std::stod(score);
      best_t = std::stoll(t);
    }
  }
  EXPECT_EQ(j["t_star_us"].get<Timestamp>(), best_t);
}

TEST_F(CliTest, FocusTraceWritesReport) {
  const auto trace = dir_->path() / "trace.csv";
  const CliRun r = cli({"focus", data("b1.csv"), "--trace", trace.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string text = slurp(trace);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 16);
  EXPECT_EQ(text.back(), '\n');
}

TEST_F(CliTest, FlagsForTheOtherMethodRejected) {
  EXPECT_EQ(cli({"focus", data("a1.csv"), "--dt", "0.1"}).code, kExitBadInput);
  EXPECT_EQ(cli({"focus", data("a1.csv"), "--method", "naive", "--mu", "0.01"}).code, kExitBadInput);
  EXPECT_EQ(cli({"focus", data("a1.csv"), "--method", "naive", "--trace", "t.csv"}).code, kExitBadInput);
  EXPECT_NE(cli({"focus", data("a1.csv"), "--method", "magic"}).code, kExitOk);
  EXPECT_EQ(cli({"focus", data("a1.csv"), "--mu", "1.5"}).code, kExitBadInput);
}

TEST_F(CliTest, EmptyStreamExitsTwo) {
  TempDir d("cli-empty");
  SequenceMeta meta;
  meta.width = meta.height = 4;
  save_sequence(d / "e.csv", EventStream{{}, 4, 4, SweepConfig{}}, meta);
  const CliRun r = cli({"focus", (d / "e.csv").string()});
  EXPECT_EQ(r.code, kExitEmptyStream);
  EXPECT_NE(r.err.find("no events to focus on"), std::string::npos);
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, MalformedInputExitsOne) {
  TempDir d("cli-bad");
  SequenceMeta meta;
  meta.width = meta.height = 4;
  write_sidecar(d / "m.json", meta);
  detail::write_text_file(d / "m.csv", "# evaf-events v1\n10,1,1,1\n12,1,1,oops\n");
  const CliRun r = cli({"focus", (d / "m.csv").string()});
  EXPECT_EQ(r.code, kExitBadInput);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"focus", (d / "missing.csv").string()}).code, kExitBadInput);
}

TEST_F(CliTest, ReconstructWritesPgm) {
  const auto pgm = dir_->path() / "frame.pgm";
  const CliRun r = cli({"reconstruct", data("a1.csv"), "--t", "2.0", "--measure", "grad", "--out", pgm.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["t_us"], 2'000'000);
  EXPECT_GT(j["mean_abs_log_intensity"].get<double>(), 0.0);
  EXPECT_GE(j["grad"].get<double>(), 0.0);
  EXPECT_EQ(slurp(pgm).substr(0, 15), "P5\n40 40\n65535\n");
  EXPECT_EQ(cli({"reconstruct", data("a1.csv"), "--t", "99"}).code, kExitBadInput);
}

TEST_F(CliTest, BenchWritesParsableReport) {
  const auto stem = dir_->path() / "bench" / "res";
  const CliRun r = cli({"bench", "--dataset", (dir_->path() / "data").string(), "--out", stem.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.rfind("condition,method,mae,rmse,n\n", 0), 0u);
  EXPECT_EQ(r.out, slurp(stem.string() + "_aggregate.csv"));
  const auto j = nlohmann::json::parse(slurp(stem.string() + ".json"));
  EXPECT_EQ(j["rows"].size(), 4u * 8u);
  EXPECT_EQ(j["aggregates"].size(), 3u * 8u);
  for (const auto& a : j["aggregates"]) EXPECT_GE(a["rmse"].get<double>(), a["mae"].get<double>() * (1 - 1e-12));
}

TEST_F(CliTest, BenchWithMethodsFile) {
  const auto methods = dir_->path() / "methods.json";
  detail::write_text_file(methods, R"({"methods": [{"name": "fast", "kind": "er_egs", "mu": 0.01}]})");
  const auto stem = dir_->path() / "bench2" / "res";
  const CliRun r = cli({"bench", "--dataset", (dir_->path() / "data").string(), "--methods", methods.string(),
                        "--out", stem.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(slurp(stem.string() + ".json"));
  EXPECT_EQ(j["methods"], nlohmann::json::array({"fast"}));
}

TEST(Cli, SimulateIsDeterministic) {
  TempDir d("cli-sim");
  SequenceSpec s = cli_spec("s", 0.5);
  s.texture.width = s.texture.height = 24;
  detail::write_text_file(d / "spec.json", sequence_spec_to_json(s).dump(2));
  const CliRun a = cli({"simulate", "--spec", (d / "spec.json").string(), "--out", (d / "a").string()});
  const CliRun b = cli({"simulate", "--spec", (d / "spec.json").string(), "--out", (d / "b").string()});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  ASSERT_EQ(b.code, kExitOk) << b.err;
  EXPECT_EQ(a.out, b.out);
  for (const char* f : {"manifest.json", "s.csv", "s.json"}) {
    EXPECT_FALSE(slurp(d / "a" / f).empty()) << f;
    EXPECT_EQ(slurp(d / "a" / f), slurp(d / "b" / f)) << f;
  }
  const CliRun c =
      cli({"simulate", "--spec", (d / "spec.json").string(), "--seed", "77", "--out", (d / "c").string()});
  ASSERT_EQ(c.code, kExitOk) << c.err;
  EXPECT_NE(slurp(d / "a" / "s.csv"), slurp(d / "c" / "s.csv"));
}

TEST(Cli, SimulateNeedsExactlyOneSource) {
  TempDir d("cli-sim2");
  EXPECT_EQ(cli({"simulate", "--out", d.path().string()}).code, kExitBadInput);
  EXPECT_NE(cli({"simulate", "--spec", "x.json", "--suite", "default", "--out", d.path().string()}).code, kExitOk);
  EXPECT_EQ(cli({"simulate", "--suite", "huge", "--out", d.path().string()}).code, kExitBadInput);
  EXPECT_NE(cli({"simulate", "--suite", "default"}).code, kExitOk);
}

TEST(Cli, BinaryRunsAndUsesExitCodes) {
  const std::string bin = EVAF_CLI_PATH;
  EXPECT_EQ(std::system((bin + " --version > /dev/null").c_str()), 0);
  const int rc = std::system((bin + " focus /nonexistent/x.csv 2> /dev/null").c_str());
  ASSERT_TRUE(WIFEXITED(rc));
  EXPECT_EQ(WEXITSTATUS(rc), kExitBadInput);
}

TEST(Cli, ShippedConfigsParse) {
  const std::filesystem::path dir = EVAF_CONFIG_DIR;
  const auto specs = sequence_specs_from_json(detail::read_json_file(dir / "sequences.json"), dir);
  ASSERT_EQ(specs.size(), 2u);
  EXPECT_EQ(specs[1].scene.vx, 3.0);
  EXPECT_EQ(specs[1].scene.texture.width, 96);
  const auto methods = methods_from_json(detail::read_json_file(dir / "methods.json"));
  EXPECT_EQ(methods.size(), 6u);
  EXPECT_EQ(methods[5].decay, 0.5);
}
