#pragma once

// Subcommand implementations behind the `selfsense` executable. Each command
// takes a finalized RunConfig plus command options, writes its files under
// `cfg.out` and returns a process exit code.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "selfsense/config.hpp"
#include "selfsense/control.hpp"
#include "selfsense/io.hpp"
#include "selfsense/observer.hpp"
#include "selfsense/plant.hpp"

#ifndef SELFSENSE_VERSION
#define SELFSENSE_VERSION "0.0.0"
#endif

namespace selfsense::cli {

namespace fs = std::filesystem;
using io::json;

enum Exit : int { ok = 0, usage = 1, data = 2, no_convergence = 3 };

/// Exit code for an exception escaping a command.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InfeasibleError*>(&e)) return usage;
  return data;
}

/// Ordered results of fn over items, at most `jobs` running at once.
template <class T, class Fn>
auto parallel_map(const std::vector<T>& items, int jobs, Fn fn) {
  using R = decltype(fn(items.front()));
  std::vector<R> out;
  out.reserve(items.size());
  if (jobs <= 1) {
    for (const auto& it : items) out.push_back(fn(it));
    return out;
  }
  for (std::size_t i = 0; i < items.size(); i += static_cast<std::size_t>(jobs)) {
    std::vector<std::future<R>> batch;
    const std::size_t end = std::min(items.size(), i + static_cast<std::size_t>(jobs));
    for (std::size_t k = i; k < end; ++k)
      batch.push_back(std::async(std::launch::async, [&fn, &items, k] { return fn(items[k]); }));
    for (auto& f : batch) out.push_back(f.get());
  }
  return out;
}

inline std::string config_hash(const config::RunConfig& c) {
  return io::fnv1a_hex(io::dump(config::effective_json(c)));
}

inline json provenance(const config::RunConfig& c) {
  return {{"version", SELFSENSE_VERSION}, {"seed", c.seed}, {"config_hash", config_hash(c)}};
}

inline void write_effective_config(const config::RunConfig& c) {
  io::atomic_write(c.out / "config_effective.json", io::dump(config::effective_json(c)));
}

/// Scenarios of the requested kinds from the config, or `fallback` when the
/// config lists none of them. Any other kind listed is rejected.
inline std::vector<plant::Scenario> pick_scenarios(const config::RunConfig& c,
                                                   std::initializer_list<plant::ScenarioKind> kinds,
                                                   std::vector<plant::Scenario> fallback,
                                                   const std::string& command) {
  std::vector<plant::Scenario> out;
  for (const auto& s : c.scenarios) {
    if (std::find(kinds.begin(), kinds.end(), s.kind) == kinds.end())
      throw ConfigError("scenario '" + s.name + "' (" + plant::to_string(s.kind) +
                        ") cannot run under '" + command + "'");
    out.push_back(s);
  }
  return out.empty() ? fallback : out;
}

inline std::vector<plant::Scenario> standard_tracking_set() {
  using plant::Waveform;
  namespace sc = plant::scenarios;
  return {sc::force_tracking(Waveform::sine, 0.2),        sc::force_tracking(Waveform::sine, 0.05),
          sc::force_tracking(Waveform::triangle, 0.2),    sc::force_tracking(Waveform::triangle, 0.05),
          sc::displacement_tracking(Waveform::sine, 0.2), sc::displacement_tracking(Waveform::sine, 0.05)};
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
  std::optional<fs::path> data;
  std::optional<std::string> model;
};

inline json holdout_json(const std::vector<double>& pred, const std::vector<double>& obs) {
  try {
    return io::goodness_json(ident::goodness(pred, obs));
  } catch (const DataError& e) {
    return {{"available", false}, {"reason", e.what()}};
  }
}

inline int cmd_fit(const config::RunConfig& c, const FitOptions& o, std::ostream& log = std::cerr) {
  const auto path = o.data ? o.data : c.data;
  if (!path) throw ConfigError("fit needs a dataset (--data or config 'data')");
  config::FitModel model = c.fit.model;
  if (o.model) {
    const auto m = config::parse_fit_model(*o.model);
    if (!m) throw ConfigError("--model must be auto, dynamic, inductance or both");
    model = *m;
  }
  ident::Dataset ds = io::read_csv(*path);
  ds.validate();

  if (model == config::FitModel::automatic) {
    if (!ds.has_force()) throw MissingColumnError("F");
    model = ds.has_length() ? config::FitModel::both : config::FitModel::inductance;
  }
  const bool want_dyn = model == config::FitModel::dynamic || model == config::FitModel::both;
  const bool want_ind = model == config::FitModel::inductance || model == config::FitModel::both;
  if (!ds.has_force()) throw MissingColumnError("F");
  if (want_dyn && !ds.has_length()) throw MissingColumnError("x");

  // Trailing holdout split.
  ident::Dataset train = ds, test;
  if (c.fit.holdout > 0.0) {
    const auto n_test = static_cast<std::size_t>(std::floor(c.fit.holdout * static_cast<double>(ds.size())));
    if (n_test == 0 || n_test >= ds.size()) throw DataError("holdout leaves an empty training or test set");
    train.samples.assign(ds.samples.begin(), ds.samples.end() - static_cast<std::ptrdiff_t>(n_test));
    test.samples.assign(ds.samples.end() - static_cast<std::ptrdiff_t>(n_test), ds.samples.end());
    train.extra.clear();
  }

  json report = {{"provenance", provenance(c)}, {"data", path->filename().string()}, {"samples", ds.size()}};
  bool converged = true;
  if (want_dyn) {
    const auto r = ident::fit_dynamic(train);
    io::atomic_write(c.out / "dynamic.json", io::dump(io::to_json(r.params)));
    report["dynamic"] = io::report_json(r);
    if (!test.empty()) {
      std::vector<double> pred, obs;
      for (const auto& s : test.samples) {
        pred.push_back(model::eval_dynamic_force(r.params, *s.x, s.P));
        obs.push_back(*s.F);
      }
      report["dynamic"]["holdout"] = holdout_json(pred, obs);
    }
    log << "dynamic: k=" << io::fmt(r.params.k, 6) << " x0=" << io::fmt(r.params.x0, 6)
        << " c=" << io::fmt(r.params.c, 6) << " R2=" << io::fmt(r.r2, 6) << "\n";
  }
  if (want_ind) {
    const auto r = ident::fit_inductance(train, c.bundle.ind, ident::CoefficientBounds::defaults(),
                                         c.fit.inductance);
    converged = converged && r.converged;
    io::atomic_write(c.out / "inductance.json", io::dump(io::to_json(r.params)));
    report["inductance"] = io::report_json(r);
    if (!test.empty()) {
      std::vector<double> pred, obs;
      for (const auto& s : test.samples) {
        pred.push_back(model::eval_inductance(r.params, std::max(0.0, *s.F), s.P));
        obs.push_back(s.L);
      }
      report["inductance"]["holdout"] = holdout_json(pred, obs);
    }
    log << "inductance: RMSE=" << io::fmt(r.rmse, 6) << " uH R2=" << io::fmt(r.r2, 6)
        << (r.converged ? "" : " (not converged: " + r.status + ")") << "\n";
  }
  io::atomic_write(c.out / "fit_report.json", io::dump(report));
  return converged ? ok : no_convergence;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateOptions {
  std::optional<fs::path> data;
};

struct Estimates {
  std::vector<double> F_hat, x_hat;
};

/// Runs the observer over a dataset. The observer starts from the true force
/// when the dataset has one, otherwise from the rising-branch preimage.
inline Estimates run_observer(const ident::Dataset& ds, const control::Bundle& b) {
  observer::Observer obs(b.ind, b.dyn, b.observer, b.filter);
  const auto& s0 = ds.samples.front();
  const auto* F_true = ds.channel("F_true");
  double F0 = F_true ? (*F_true)[0] : s0.F ? *s0.F
                                           : observer::solve_pseudo_measurement(s0.L, s0.P, b.observer.envelope.F_min,
                                                                                b.ind, b.observer);
  F0 = std::clamp(F0, b.observer.envelope.F_min, b.observer.envelope.F_max);
  obs.reset(F0, s0.L);
  Estimates e;
  e.F_hat.reserve(ds.size());
  e.x_hat.reserve(ds.size());
  for (const auto& s : ds.samples) {
    const auto r = obs.step(s.L, s.P);
    e.F_hat.push_back(r.F_hat);
    e.x_hat.push_back(r.x_hat);
  }
  return e;
}

/// Indices within `half_window_s` of a motion reversal (sign change of the
/// length rate).
inline std::vector<bool> reversal_mask(const ident::Dataset& ds, double half_window_s = 0.5) {
  std::vector<bool> mask(ds.size(), false);
  if (!ds.has_length() || ds.size() < 3) return mask;
  std::vector<double> rev;
  int last = 0;
  for (std::size_t i = 1; i < ds.size(); ++i) {
    const double d = *ds.samples[i].x - *ds.samples[i - 1].x;
    const int sgn = d > 1e-12 ? 1 : d < -1e-12 ? -1 : 0;
    if (sgn != 0) {
      if (last != 0 && sgn != last) rev.push_back(ds.samples[i - 1].t);
      last = sgn;
    }
  }
  std::size_t k = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double t = ds.samples[i].t;
    while (k < rev.size() && rev[k] < t - half_window_s) ++k;
    mask[i] = k < rev.size() && std::abs(rev[k] - t) <= half_window_s;
  }
  return mask;
}

/// Goodness metrics of estimates against whatever truth the dataset carries.
inline json estimation_metrics(const ident::Dataset& ds, const Estimates& e) {
  json m = json::object();
  const auto* F_true = ds.channel("F_true");
  std::vector<double> Fobs;
  if (F_true) Fobs = *F_true;
  else if (ds.has_force())
    for (const auto& s : ds.samples) Fobs.push_back(*s.F);
  std::vector<double> xobs;
  if (ds.has_length())
    for (const auto& s : ds.samples) xobs.push_back(*s.x);

  m["available"] = !Fobs.empty() || !xobs.empty();
  if (!Fobs.empty()) {
    m["force"] = io::goodness_json(ident::goodness(e.F_hat, Fobs));
    m["force"]["max_abs"] = ident::error_stats(e.F_hat, Fobs).max_abs;
    m["force"]["truth_channel"] = F_true ? "F_true" : "F";
    const auto mask = reversal_mask(ds);
    std::vector<double> pin, oin, pout, oout;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      (mask[i] ? pin : pout).push_back(e.F_hat[i]);
      (mask[i] ? oin : oout).push_back(Fobs[i]);
    }
    if (!pin.empty()) m["force"]["near_reversal"] = io::stats_json(ident::error_stats(pin, oin));
    if (!pout.empty()) m["force"]["away_from_reversal"] = io::stats_json(ident::error_stats(pout, oout));
  }
  if (!xobs.empty()) {
    m["displacement"] = io::goodness_json(ident::goodness(e.x_hat, xobs));
    m["displacement"]["max_abs"] = ident::error_stats(e.x_hat, xobs).max_abs;
  }
  if (m["available"] == false) m["reason"] = "dataset has no force or length truth columns";
  return m;
}

inline std::string estimates_csv(const ident::Dataset& ds, const Estimates& e) {
  io::Table t;
  std::vector<double> col(ds.size());
  auto fill = [&](auto get) {
    for (std::size_t i = 0; i < ds.size(); ++i) col[i] = get(ds.samples[i]);
    return col;
  };
  t.add("t", fill([](const ident::Sample& s) { return s.t; }));
  t.add("P", fill([](const ident::Sample& s) { return s.P; }));
  t.add("L", fill([](const ident::Sample& s) { return s.L; }));
  if (ds.has_force()) t.add("F", fill([](const ident::Sample& s) { return *s.F; }));
  if (ds.has_length()) t.add("x", fill([](const ident::Sample& s) { return *s.x; }));
  for (const auto& [name, v] : ds.extra) t.add(name, v);
  t.add("F_hat", e.F_hat);
  t.add("x_hat", e.x_hat);
  return t.to_csv();
}

inline int cmd_estimate(const config::RunConfig& c, const EstimateOptions& o, std::ostream& log = std::cerr) {
  const auto path = o.data ? o.data : c.data;
  if (!path) throw ConfigError("estimate needs a dataset (--data or config 'data')");
  ident::Dataset ds = io::read_csv(*path);
  ds.validate();
  const Estimates e = run_observer(ds, c.bundle);
  io::atomic_write(c.out / "estimates.csv", estimates_csv(ds, e));
  json m = {{"provenance", provenance(c)}, {"data", path->filename().string()}, {"samples", ds.size()},
            {"series", "estimates.csv"}};
  m["metrics"] = estimation_metrics(ds, e);
  io::atomic_write(c.out / "estimate_metrics.json", io::dump(m));
  if (m["metrics"]["available"] == true && m["metrics"].contains("force"))
    log << "force NRMSE " << io::fmt(m["metrics"]["force"]["nrmse_percent"].get<double>(), 4) << " %\n";
  return ok;
}

// ---------------------------------------------------------------------------
// simulate

inline int cmd_simulate(const config::RunConfig& c, std::ostream& log = std::cerr) {
  using K = plant::ScenarioKind;
  const auto list = pick_scenarios(
      c, {K::calibration_grid, K::isobaric_sweep, K::isometric_sweep, K::cyclic_estimation, K::load_perturbation},
      {plant::scenarios::calibration_grid()}, "simulate");
  const auto results = parallel_map(list, c.jobs, [&](const plant::Scenario& s) {
    try {
      return plant::run_scenario(s, c.bundle.plant);
    } catch (const Error& e) {
      throw ConfigError("scenario '" + s.name + "': " + e.what());
    }
  });
  json summary = {{"provenance", provenance(c)}, {"scenarios", json::array()}};
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string file = list[i].name + ".csv";
    io::atomic_write(c.out / file, io::to_csv(results[i]));
    summary["scenarios"].push_back({{"name", list[i].name},
                                    {"kind", plant::to_string(list[i].kind)},
                                    {"samples", results[i].size()},
                                    {"file", file}});
    log << list[i].name << ": " << results[i].size() << " samples -> " << file << "\n";
  }
  io::atomic_write(c.out / "simulate_summary.json", io::dump(summary));
  write_effective_config(c);
  return ok;
}

// ---------------------------------------------------------------------------
// track

inline std::string tracking_csv(const control::TrackingGroup& g) {
  io::Table t;
  t.add("t", g.open_loop.t);
  t.add("reference", g.open_loop.reference);
  for (const auto* r : {&g.open_loop, &g.sensor_fb, &g.self_sensing}) {
    const std::string m = control::to_string(r->mode);
    t.add(m + "_truth", r->truth);
    t.add(m + "_P_cmd", r->P_cmd);
  }
  t.add("sensor_fb_measurement", g.sensor_fb.measurement);
  t.add("self_sensing_estimate", g.self_sensing.estimate);
  t.add("self_sensing_F_hat", g.self_sensing.F_hat);
  t.add("self_sensing_x_hat", g.self_sensing.x_hat);
  return t.to_csv();
}

inline json tracking_json(const control::TrackingGroup& g, const std::string& file) {
  const bool disp = g.open_loop.displacement;
  const double scale = disp ? 1e3 : 1.0;  // report displacement in mm
  auto mode = [&](const control::TrackingResult& r) {
    json j = {{"rmse", r.metrics.rmse * scale}, {"mae", r.metrics.mae * scale}, {"max_abs", r.metrics.max_abs * scale}};
    if (r.improvement) j["improvement_percent"] = *r.improvement;
    return j;
  };
  return {{"scenario", g.open_loop.scenario},
          {"quantity", disp ? "displacement" : "force"},
          {"unit", disp ? "mm" : "N"},
          {"file", file},
          {"open_loop", mode(g.open_loop)},
          {"sensor_fb", mode(g.sensor_fb)},
          {"self_sensing", mode(g.self_sensing)}};
}

/// Table-I-style text: one row per trajectory, RMSE per strategy and the
/// improvement over open loop.
inline std::string tracking_table(const json& rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %-4s %12s %12s %8s %12s %8s\n", "trajectory", "unit", "open-loop",
                "sensor-fb", "impr%", "self-sense", "impr%");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-28s %-4s %12.4f %12.4f %8.1f %12.4f %8.1f\n",
                  r["scenario"].get<std::string>().c_str(), r["unit"].get<std::string>().c_str(),
                  r["open_loop"]["rmse"].get<double>(), r["sensor_fb"]["rmse"].get<double>(),
                  r["sensor_fb"]["improvement_percent"].get<double>(), r["self_sensing"]["rmse"].get<double>(),
                  r["self_sensing"]["improvement_percent"].get<double>());
    out += line;
  }
  return out;
}

inline json run_track(const config::RunConfig& c, const std::vector<plant::Scenario>& list) {
  const auto groups = parallel_map(list, c.jobs, [&](const plant::Scenario& s) {
    try {
      return control::run_tracking_group(s, c.bundle);
    } catch (const Error& e) {
      throw ConfigError("scenario '" + s.name + "': " + e.what());
    }
  });
  json rows = json::array();
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string file = "track_" + list[i].name + ".csv";
    io::atomic_write(c.out / file, tracking_csv(groups[i]));
    rows.push_back(tracking_json(groups[i], file));
  }
  return rows;
}

inline int cmd_track(const config::RunConfig& c, std::ostream& log = std::cerr) {
  using K = plant::ScenarioKind;
  const auto list = pick_scenarios(c, {K::force_tracking, K::displacement_tracking}, standard_tracking_set(), "track");
  const json rows = run_track(c, list);
  const std::string table = tracking_table(rows);
  io::atomic_write(c.out / "track_table.txt", table);
  io::atomic_write(c.out / "track_metrics.json", io::dump({{"provenance", provenance(c)}, {"trajectories", rows}}));
  write_effective_config(c);
  log << table;
  return ok;
}

// ---------------------------------------------------------------------------
// perturb

inline std::string perturbation_csv(const control::PerturbationResult& p) {
  io::Table t;
  const auto& r = p.run;
  std::vector<double> err(r.t.size());
  for (std::size_t i = 0; i < err.size(); ++i) err[i] = r.F_hat[i] - r.F_true[i];
  t.add("t", r.t);
  t.add("load", p.load);
  t.add("F_true", r.F_true);
  t.add("F_hat", r.F_hat);
  t.add("F_error", err);
  t.add("x_reference", r.reference);
  t.add("x_true", r.x_true);
  t.add("x_hat", r.x_hat);
  t.add("P_cmd", r.P_cmd);
  return t.to_csv();
}

inline json run_perturb(const config::RunConfig& c, const std::vector<plant::Scenario>& list) {
  const auto res = parallel_map(list, c.jobs, [&](const plant::Scenario& s) {
    try {
      return control::run_perturbation(s, c.bundle);
    } catch (const Error& e) {
      throw ConfigError("scenario '" + s.name + "': " + e.what());
    }
  });
  json rows = json::array();
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string file = "perturb_" + list[i].name + ".csv";
    io::atomic_write(c.out / file, perturbation_csv(res[i]));
    rows.push_back({{"scenario", list[i].name},
                    {"file", file},
                    {"load_events", plant::load_schedule(list[i]).size()},
                    {"force_error", io::stats_json(res[i].estimation)},
                    {"drift", res[i].drift},
                    {"length_error_mm", io::stats_json(control::window_stats(
                                             res[i].run.x_true, res[i].run.reference, res[i].run.metric_begin,
                                             res[i].run.t.size()))}});
    rows.back()["length_error_mm"]["rmse"] = rows.back()["length_error_mm"]["rmse"].get<double>() * 1e3;
    rows.back()["length_error_mm"]["mae"] = rows.back()["length_error_mm"]["mae"].get<double>() * 1e3;
    rows.back()["length_error_mm"]["max_abs"] = rows.back()["length_error_mm"]["max_abs"].get<double>() * 1e3;
    rows.back()["length_error_mm"]["mean"] = rows.back()["length_error_mm"]["mean"].get<double>() * 1e3;
  }
  return rows;
}

inline int cmd_perturb(const config::RunConfig& c, std::ostream& log = std::cerr) {
  using K = plant::ScenarioKind;
  const auto list = pick_scenarios(c, {K::load_perturbation}, {plant::scenarios::load_perturbation()}, "perturb");
  const json rows = run_perturb(c, list);
  io::atomic_write(c.out / "perturb_metrics.json", io::dump({{"provenance", provenance(c)}, {"runs", rows}}));
  write_effective_config(c);
  for (const auto& r : rows)
    log << r["scenario"].get<std::string>() << ": max |F error| " << io::fmt(r["force_error"]["max_abs"].get<double>(), 4)
        << " N, RMSE " << io::fmt(r["force_error"]["rmse"].get<double>(), 4) << " N, drift "
        << io::fmt(r["drift"].get<double>(), 4) << " N\n";
  return ok;
}

// ---------------------------------------------------------------------------
// report

/// Everything at once: cyclic estimation, the tracking comparison and the load
/// perturbation run, with one metrics document pointing at every series file.
inline int cmd_report(const config::RunConfig& c, std::ostream& log = std::cerr) {
  using K = plant::ScenarioKind;
  std::vector<plant::Scenario> est, trk, per;
  for (const auto& s : c.scenarios) {
    if (s.kind == K::cyclic_estimation) est.push_back(s);
    else if (s.kind == K::force_tracking || s.kind == K::displacement_tracking) trk.push_back(s);
    else if (s.kind == K::load_perturbation) per.push_back(s);
    else throw ConfigError("scenario '" + s.name + "' (" + plant::to_string(s.kind) + ") has no place in a report");
  }
  if (est.empty()) est.push_back(plant::scenarios::cyclic_estimation());
  if (trk.empty()) trk = standard_tracking_set();
  if (per.empty()) per.push_back(plant::scenarios::load_perturbation());

  json report = {{"provenance", provenance(c)}};
  json est_rows = json::array();
  const auto est_runs = parallel_map(est, c.jobs, [&](const plant::Scenario& s) {
    ident::Dataset ds = plant::run_scenario(s, c.bundle.plant);
    Estimates e = run_observer(ds, c.bundle);
    return std::make_pair(std::move(ds), std::move(e));
  });
  for (std::size_t i = 0; i < est.size(); ++i) {
    const std::string file = "estimate_" + est[i].name + ".csv";
    io::atomic_write(c.out / file, estimates_csv(est_runs[i].first, est_runs[i].second));
    json row = estimation_metrics(est_runs[i].first, est_runs[i].second);
    row["scenario"] = est[i].name;
    row["file"] = file;
    est_rows.push_back(row);
  }
  report["estimation"] = est_rows;
  report["tracking"] = run_track(c, trk);
  report["perturbation"] = run_perturb(c, per);

  std::string text = "selfsense " SELFSENSE_VERSION "  seed " + std::to_string(c.seed) + "  config " +
                     config_hash(c) + "\n\nEstimation\n";
  for (const auto& r : est_rows) {
    text += "  " + r["scenario"].get<std::string>() + ": force NRMSE " +
            io::fmt(r["force"]["nrmse_percent"].get<double>(), 4) + " %, RMSE " +
            io::fmt(r["force"]["rmse"].get<double>(), 4) + " N; displacement NRMSE " +
            io::fmt(r["displacement"]["nrmse_percent"].get<double>(), 4) + " %, RMSE " +
            io::fmt(r["displacement"]["rmse"].get<double>() * 1e3, 4) + " mm\n";
  }
  text += "\nTracking (RMSE, improvement over open loop)\n" + tracking_table(report["tracking"]);
  text += "\nLoad perturbation\n";
  for (const auto& r : report["perturbation"])
    text += "  " + r["scenario"].get<std::string>() + ": max |F error| " +
            io::fmt(r["force_error"]["max_abs"].get<double>(), 4) + " N, RMSE " +
            io::fmt(r["force_error"]["rmse"].get<double>(), 4) + " N, drift " + io::fmt(r["drift"].get<double>(), 4) +
            " N\n";

  io::atomic_write(c.out / "report.json", io::dump(report));
  io::atomic_write(c.out / "report.txt", text);
  write_effective_config(c);
  log << text;
  return ok;
}

}  // namespace selfsense::cli
