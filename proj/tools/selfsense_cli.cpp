// selfsense: fit, estimate, simulate, track, perturb, report.
// Exit codes: 0 ok, 1 usage/config, 2 data, 3 fit did not converge.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "selfsense/commands.hpp"

namespace {

struct Globals {
  std::optional<std::string> config, out, data, model;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs, order;
  std::optional<double> fc, fs;
};

selfsense::config::RunConfig resolve(const Globals& g) {
  using namespace selfsense;
  config::RunConfig c = g.config ? config::load(*g.config) : config::defaults();
  if (g.seed) c.seed = *g.seed;
  if (g.out) c.out = *g.out;
  if (g.jobs) c.jobs = *g.jobs;
  if (g.order) c.bundle.filter.order = *g.order;
  if (g.fc) c.bundle.filter.cutoff_hz = *g.fc;
  if (g.fs) c.bundle.plant.sensor_rate_hz = *g.fs;  // the filter runs at the sensor rate
  c.finalize();
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace selfsense;
  CLI::App app{"Inductance self-sensing toolkit for pneumatic twisted-and-coiled actuators"};
  app.set_version_flag("--version", SELFSENSE_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "RNG seed (overrides config)");
  app.add_option("--out", g.out, "output directory (default: out)");
  app.add_option("--jobs", g.jobs, "scenarios run concurrently")->check(CLI::PositiveNumber);
  app.add_option("--fc", g.fc, "low-pass cutoff, Hz (default 10)");
  app.add_option("--fs", g.fs, "sensor sample rate, Hz (default 100)");
  app.add_option("--order", g.order, "low-pass order (default 3)");

  auto* fit = app.add_subcommand("fit", "identify dynamic and/or inductance parameters from a CSV");
  auto* est = app.add_subcommand("estimate", "run the observer over a CSV of t,P,L[,F][,x]");
  auto* sim = app.add_subcommand("simulate", "run plant-only scenarios and write their datasets");
  auto* trk = app.add_subcommand("track", "compare open-loop, sensor and self-sensing feedback");
  auto* per = app.add_subcommand("perturb", "closed-loop hold under random loads");
  auto* rep = app.add_subcommand("report", "estimation, tracking and perturbation in one run");
  for (auto* sc : {fit, est}) sc->add_option("--data", g.data, "input CSV")->check(CLI::ExistingFile);
  fit->add_option("--model", g.model, "auto|dynamic|inductance|both");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::ok : cli::usage;
  }

  try {
    const config::RunConfig c = resolve(g);
    if (*fit) {
      cli::FitOptions o;
      if (g.data) o.data = *g.data;
      o.model = g.model;
      return cli::cmd_fit(c, o);
    }
    if (*est) {
      cli::EstimateOptions o;
      if (g.data) o.data = *g.data;
      return cli::cmd_estimate(c, o);
    }
    if (*sim) return cli::cmd_simulate(c);
    if (*trk) return cli::cmd_track(c);
    if (*per) return cli::cmd_perturb(c);
    if (*rep) return cli::cmd_report(c);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code_for(e);
  }
  return cli::usage;
}
