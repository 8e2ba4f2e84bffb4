#include <filesystem>

#include <gtest/gtest.h>

#include "selfsense/config.hpp"
#include "selfsense/io.hpp"

using namespace selfsense;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("selfsense_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

config::RunConfig parse_text(const std::string& text) {
  config::RunConfig c = config::parse(io::parse_json(text, "test"));
  c.finalize();
  c.validate();
  return c;
}

}  // namespace

TEST(Csv, ParsesRequiredAndOptionalColumns) {
  const auto ds = io::parse_csv("t, P ,L,F,x,F_true\n0.01,0.1,4.7,1.0,0.12,0.99\n\n0.02,0.1,4.71,1.1,0.121,1.01\n");
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_TRUE(ds.has_force());
  EXPECT_TRUE(ds.has_length());
  EXPECT_EQ(ds.samples[1].L, 4.71);
  ASSERT_NE(ds.channel("F_true"), nullptr);
  EXPECT_EQ((*ds.channel("F_true"))[1], 1.01);
}

TEST(Csv, ColumnOrderIsFree) {
  const auto ds = io::parse_csv("L,t,P\r\n4.7,0.5,0.2\r\n");
  EXPECT_EQ(ds.samples[0].t, 0.5);
  EXPECT_EQ(ds.samples[0].P, 0.2);
  EXPECT_FALSE(ds.has_force());
}

TEST(Csv, Errors) {
  EXPECT_THROW(io::parse_csv(""), ParseError);
  EXPECT_THROW(io::parse_csv("t,P,L\n"), ParseError);
  EXPECT_THROW(io::parse_csv("t,P\n0,0\n"), MissingColumnError);
  EXPECT_THROW(io::parse_csv("t,P,L,t\n0,0,0,0\n"), ParseError);
  try {
    io::parse_csv("t,P,L\n0,0.1,4.7\n0.01,0.1,oops\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("'L'"), std::string::npos);
  }
  try {
    io::parse_csv("t,P,L\n0,0.1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  try {
    io::parse_csv("t,L\n0,4.7\n");
    FAIL();
  } catch (const MissingColumnError& e) {
    EXPECT_NE(std::string(e.what()).find("'P'"), std::string::npos);
  }
}

TEST(Csv, RoundTrip) {
  const auto ds = io::parse_csv("t,P,L,F\n0.01,0.25,4.73,1.5\n0.02,0.25,4.74,1.55\n");
  const auto back = io::parse_csv(io::to_csv(ds));
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.samples[i].L, ds.samples[i].L);
    EXPECT_EQ(*back.samples[i].F, *ds.samples[i].F);
  }
  EXPECT_FALSE(back.has_length());
}

TEST(Csv, ReadFileAddsPathToErrors) {
  const auto d = scratch_dir("csv");
  io::atomic_write(d / "bad.csv", "t,P,L\n0,x,1\n");
  try {
    io::read_csv(d / "bad.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.csv:2"), std::string::npos);
  }
  EXPECT_THROW(io::read_csv(d / "missing.csv"), DataError);
}

TEST(Format, StableNumbers) {
  EXPECT_EQ(io::fmt(-0.0), "0");
  EXPECT_EQ(io::fmt(0.1), "0.1");
  EXPECT_EQ(io::fmt(38.6), "38.6");
  EXPECT_EQ(io::fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(io::fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(Params, JsonRoundTrip) {
  const model::DynamicParams d{40.1, 0.095, 1.7};
  EXPECT_EQ(io::dynamic_from_json(io::to_json(d)), d);
  const auto ip = plant::reference_inductance_params();
  EXPECT_EQ(io::inductance_from_json(io::to_json(ip)), ip);
  EXPECT_THROW(io::dynamic_from_json(io::json::parse(R"({"k":1,"x0":0.1})")), ConfigError);
  EXPECT_THROW(io::dynamic_from_json(io::json::parse(R"({"k":-1,"x0":0.1,"c":1})")), ConfigError);
  EXPECT_THROW(io::inductance_from_json(io::json::parse(R"({"p":[1,2,3]})")), ConfigError);
}

TEST(AtomicWrite, CreatesDirectoriesAndLeavesNoTemp) {
  const auto d = scratch_dir("atomic");
  io::atomic_write(d / "a" / "b.txt", "hello");
  EXPECT_EQ(io::read_file(d / "a" / "b.txt"), "hello");
  EXPECT_FALSE(fs::exists(d / "a" / "b.txt.tmp"));
}

TEST(Config, MinimalDocument) {
  const auto c = parse_text(R"({"schema":"selfsense.run/1"})");
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.jobs, 1);
  EXPECT_TRUE(c.scenarios.empty());
  EXPECT_EQ(c.bundle.filter.order, 3);
  EXPECT_EQ(c.bundle.filter.cutoff_hz, 10.0);
  EXPECT_EQ(c.bundle.filter.sample_rate_hz, 100.0);
}

TEST(Config, OverridesReachTheBundle) {
  const auto c = parse_text(R"({
    "schema": "selfsense.run/1", "seed": 42, "jobs": 3,
    "plant": {"noise_L": 0.02, "hysteresis": [{"width": 0.001, "weight": 4}]},
    "filter": {"order": 2, "cutoff_hz": 8},
    "observer": {"sigma_Fdot": 0.1, "R": 0.004, "grid_points": 201},
    "controller": {"preset": "hardware", "force": {"kp": 0.5}},
    "fit": {"model": "inductance", "starts": 4, "holdout": 0.2},
    "scenarios": [{"kind": "force_tracking", "name": "f", "waveform": "triangle", "frequency_hz": 0.1}]
  })");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.bundle.plant.seed, 42u);
  EXPECT_EQ(c.fit.inductance.seed, 42u);
  EXPECT_EQ(c.bundle.plant.noise_L, 0.02);
  ASSERT_EQ(c.bundle.plant.hysteresis.size(), 1u);
  EXPECT_EQ(c.bundle.filter.order, 2);
  EXPECT_NEAR(c.bundle.observer.Q(1, 1), 0.1 * 0.1 * 0.01, 1e-18);
  EXPECT_EQ(c.bundle.observer.R, 0.004);
  EXPECT_EQ(c.bundle.observer.grid_points, 201);
  EXPECT_EQ(c.bundle.force_gains.kp, 0.5);
  EXPECT_EQ(c.bundle.force_gains.ki, control::PidGains::hardware().ki);
  EXPECT_EQ(c.fit.model, config::FitModel::inductance);
  EXPECT_EQ(c.fit.holdout, 0.2);
  ASSERT_EQ(c.scenarios.size(), 1u);
  EXPECT_EQ(c.scenarios[0].waveform, plant::Waveform::triangle);
  EXPECT_NEAR(c.scenarios[0].duration_s, 2.0 / 0.1 + c.scenarios[0].warmup_s, 1e-12);
}

TEST(Config, RejectsInvalidBlocks) {
  for (const char* bad : {
           R"({})",
           R"({"schema":"selfsense.run/0"})",
           R"({"schema":"selfsense.run/1","bogus":1})",
           R"({"schema":"selfsense.run/1","scenarios":[{"kind":"warp"}]})",
           R"({"schema":"selfsense.run/1","scenarios":[{"kind":"cyclic_estimation","pressures":[]}]})",
           R"({"schema":"selfsense.run/1","scenarios":[{"kind":"cyclic_estimation","name":"a"},{"kind":"cyclic_estimation","name":"a"}]})",
           R"({"schema":"selfsense.run/1","filter":{"cutoff_hz":60}})",
           R"({"schema":"selfsense.run/1","plant":{"valve_gain":0}})",
           R"({"schema":"selfsense.run/1","plant":{"control_rate_hz":30}})",
           R"({"schema":"selfsense.run/1","observer":{"R":-1}})",
           R"({"schema":"selfsense.run/1","controller":{"preset":"turbo"}})",
           R"({"schema":"selfsense.run/1","fit":{"holdout":1.5}})",
           R"({"schema":"selfsense.run/1","jobs":0})",
           R"({"schema":"selfsense.run/1","seed":"x"})",
           R"({"schema":"selfsense.run/1","data":"/nonexistent/file.csv"})",
       })
    EXPECT_THROW(parse_text(bad), ConfigError) << bad;
  EXPECT_THROW(io::parse_json("{not json", "x"), ConfigError);
}

TEST(Config, LoadResolvesRelativePathsAndParameterFiles) {
  const auto d = scratch_dir("config");
  io::atomic_write(d / "dyn.json", io::dump(io::to_json(model::DynamicParams{40.0, 0.1, 1.5})));
  io::atomic_write(d / "run.json", R"({"schema":"selfsense.run/1","out":"results","params":{"dynamic":"dyn.json"}})");
  const auto c = config::load(d / "run.json");
  EXPECT_EQ(c.out, d / "results");
  EXPECT_EQ(c.bundle.dyn.k, 40.0);
  EXPECT_FALSE(c.source_hash.empty());
  EXPECT_THROW(config::load(d / "absent.json"), ConfigError);
}

TEST(Config, EffectiveJsonIsStable) {
  const auto a = config::effective_json(config::defaults());
  const auto b = config::effective_json(config::defaults());
  EXPECT_EQ(io::dump(a), io::dump(b));
  EXPECT_EQ(a["schema"], config::kSchema);
}
