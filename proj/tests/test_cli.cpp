// Drives the built `selfsense` executable end to end.

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "selfsense/io.hpp"

using namespace selfsense;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("selfsense_cli_") + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }

  CliResult run(const std::string& args) const {
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = "cd '" + dir.string() + "' && '" SELFSENSE_CLI "' " + args + " >/dev/null 2>'" +
                            err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, io::read_file(err)};
  }

  void write(const std::string& name, const std::string& text) const { io::atomic_write(dir / name, text); }
  std::string read(const std::string& name) const { return io::read_file(dir / name); }
  io::json json_file(const std::string& name) const { return io::json::parse(read(name)); }

  void config(const std::string& name, const std::string& scenarios) const {
    write(name, R"({"schema": "selfsense.run/1", "scenarios": )" + scenarios + "}");
  }
};

}  // namespace

TEST_F(Cli, NoSubcommandIsUsageError) { EXPECT_EQ(run("").code, 1); }

TEST_F(Cli, BadFilterFlagIsConfigError) { EXPECT_EQ(run("--fc 60 track").code, 1); }

TEST_F(Cli, SimulateThenFitCalibrationGrid) {
  ASSERT_EQ(run("simulate --out sim").code, 0);
  ASSERT_TRUE(fs::exists(dir / "sim" / "calibration_grid.csv"));
  ASSERT_EQ(run("fit --data sim/calibration_grid.csv --out fit").code, 0);
  const auto rep = json_file("fit/fit_report.json");
  EXPECT_GE(rep["inductance"]["r2"].get<double>(), 0.95);
  EXPECT_TRUE(rep["inductance"]["converged"].get<bool>());
  EXPECT_FALSE(rep["inductance"]["log"].empty());
  EXPECT_TRUE(fs::exists(dir / "fit" / "dynamic.json"));
  const auto p = io::inductance_from_json(json_file("fit/inductance.json"));
  EXPECT_GT(p.p[9], 4.0);
}

TEST_F(Cli, FitHoldoutReportsTestMetrics) {
  ASSERT_EQ(run("simulate --out sim").code, 0);
  write("cfg.json", R"({"schema":"selfsense.run/1","fit":{"holdout":0.2,"starts":2}})");
  ASSERT_EQ(run("--config cfg.json fit --data sim/calibration_grid.csv --model inductance --out fit").code, 0);
  const auto rep = json_file("fit/fit_report.json");
  EXPECT_TRUE(rep["inductance"].contains("holdout"));
  EXPECT_FALSE(rep.contains("dynamic"));
}

TEST_F(Cli, FitMissingForceColumn) {
  write("noF.csv", "t,P,L\n0,0.1,4.7\n0.01,0.1,4.71\n");
  const auto r = run("fit --data noF.csv --model inductance");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("'F'"), std::string::npos);
}

TEST_F(Cli, FitEmptyCsv) {
  write("empty.csv", "");
  const auto r = run("fit --data empty.csv");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("empty.csv:1"), std::string::npos);
}

TEST_F(Cli, FitBadNumberReportsLine) {
  write("bad.csv", "t,P,L,F\n0,0.1,4.7,1\n0.01,0.1,4.7,one\n");
  const auto r = run("fit --data bad.csv");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.csv:3"), std::string::npos);
}

TEST_F(Cli, FitNonConvergence) {
  ASSERT_EQ(run("simulate --out sim").code, 0);
  write("cfg.json", R"({"schema":"selfsense.run/1","fit":{"max_iterations":1,"starts":1}})");
  EXPECT_EQ(run("--config cfg.json fit --data sim/calibration_grid.csv --model inductance --out fit").code, 3);
  EXPECT_TRUE(fs::exists(dir / "fit" / "fit_report.json"));
}

TEST_F(Cli, EstimateCyclicRun) {
  config("cfg.json", R"([{"kind":"cyclic_estimation"}])");
  ASSERT_EQ(run("--config cfg.json simulate --out sim").code, 0);
  ASSERT_EQ(run("estimate --data sim/cyclic_estimation.csv --out est").code, 0);
  const auto m = json_file("est/estimate_metrics.json")["metrics"];
  EXPECT_TRUE(m["available"].get<bool>());
  EXPECT_LE(m["force"]["nrmse_percent"].get<double>(), 5.0);
  EXPECT_LE(m["displacement"]["nrmse_percent"].get<double>(), 12.0);
  EXPECT_TRUE(m["force"].contains("near_reversal"));
  const auto ds = io::read_csv(dir / "est" / "estimates.csv");
  EXPECT_NE(ds.channel("F_hat"), nullptr);
  EXPECT_NE(ds.channel("x_hat"), nullptr);
}

TEST_F(Cli, EstimateWithoutTruth) {
  write("raw.csv", "t,P,L\n0.01,0.2,4.9\n0.02,0.2,4.91\n0.03,0.2,4.92\n");
  ASSERT_EQ(run("estimate --data raw.csv --out est").code, 0);
  const auto m = json_file("est/estimate_metrics.json")["metrics"];
  EXPECT_FALSE(m["available"].get<bool>());
  EXPECT_TRUE(m.contains("reason"));
  const auto ds = io::read_csv(dir / "est" / "estimates.csv");
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_NE(ds.channel("F_hat"), nullptr);
}

TEST_F(Cli, EstimateNonMonotonicTime) {
  write("raw.csv", "t,P,L\n0.02,0.2,4.9\n0.01,0.2,4.91\n");
  EXPECT_EQ(run("estimate --data raw.csv --out est").code, 2);
}

TEST_F(Cli, EstimateRerunIsByteIdentical) {
  ASSERT_EQ(run("--seed 5 simulate --out sim").code, 0);
  ASSERT_EQ(run("--seed 5 estimate --data sim/calibration_grid.csv --out a").code, 0);
  ASSERT_EQ(run("--seed 5 estimate --data sim/calibration_grid.csv --out b").code, 0);
  EXPECT_EQ(read("a/estimates.csv"), read("b/estimates.csv"));
  EXPECT_EQ(read("a/estimate_metrics.json"), read("b/estimate_metrics.json"));
}

TEST_F(Cli, TrackTableAndJobsInvariance) {
  ASSERT_EQ(run("track --out a --jobs 3").code, 0);
  ASSERT_EQ(run("track --out b --jobs 1").code, 0);
  for (const auto& e : fs::directory_iterator(dir / "a"))
    EXPECT_EQ(read("a/" + e.path().filename().string()), read("b/" + e.path().filename().string()))
        << e.path().filename();
  const std::string table = read("a/track_table.txt");
  EXPECT_NE(table.find("open-loop"), std::string::npos);
  EXPECT_NE(table.find("self-sense"), std::string::npos);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 7);
  const auto m = json_file("a/track_metrics.json");
  ASSERT_EQ(m["trajectories"].size(), 6u);
  for (const auto& row : m["trajectories"]) EXPECT_TRUE(fs::exists(dir / "a" / row["file"].get<std::string>()));
}

TEST_F(Cli, PerturbSummary) {
  ASSERT_EQ(run("perturb --out p").code, 0);
  const auto m = json_file("p/perturb_metrics.json")["runs"][0];
  EXPECT_LE(m["force_error"]["max_abs"].get<double>(), 0.09);
  EXPECT_TRUE(m.contains("drift"));
  EXPECT_TRUE(fs::exists(dir / "p" / m["file"].get<std::string>()));
}

TEST_F(Cli, UnknownScenarioKindFailsBeforeAnyOutput) {
  config("cfg.json", R"([{"kind":"warp"}])");
  const auto r = run("--config cfg.json simulate --out never");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("warp"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "never"));
}

TEST_F(Cli, TrackingScenarioUnderSimulateIsConfigError) {
  config("cfg.json", R"([{"kind":"force_tracking"}])");
  EXPECT_EQ(run("--config cfg.json simulate --out never").code, 1);
  EXPECT_FALSE(fs::exists(dir / "never"));
}

TEST_F(Cli, ReportTracesEveryMetricToAFile) {
  config("cfg.json",
         R"([{"kind":"cyclic_estimation","name":"cyc","pressures":[0.1,0.3]},
             {"kind":"force_tracking","name":"f","frequency_hz":0.2},
             {"kind":"load_perturbation","name":"lp","duration_s":20,"load_events":4}])");
  ASSERT_EQ(run("--config cfg.json report --out r").code, 0);
  const auto rep = json_file("r/report.json");
  EXPECT_EQ(rep["provenance"]["seed"].get<int>(), 1);
  EXPECT_EQ(rep["provenance"]["config_hash"].get<std::string>().size(), 16u);
  for (const char* section : {"estimation", "tracking", "perturbation"})
    for (const auto& row : rep[section]) EXPECT_TRUE(fs::exists(dir / "r" / row["file"].get<std::string>()));
  EXPECT_TRUE(fs::exists(dir / "r" / "report.txt"));
  EXPECT_TRUE(fs::exists(dir / "r" / "config_effective.json"));
}

TEST_F(Cli, SeedChangesConfigHash) {
  ASSERT_EQ(run("--seed 1 perturb --out a").code, 0);
  ASSERT_EQ(run("--seed 2 perturb --out b").code, 0);
  EXPECT_NE(json_file("a/perturb_metrics.json")["provenance"]["config_hash"],
            json_file("b/perturb_metrics.json")["provenance"]["config_hash"]);
}
