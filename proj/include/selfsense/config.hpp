#pragma once

// Run configuration: one JSON document with a schema tag. Every block is
// parsed and validated up front so a bad config fails before any output.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "selfsense/control.hpp"
#include "selfsense/io.hpp"

namespace selfsense::config {

using io::json;

inline constexpr const char* kSchema = "selfsense.run/1";

enum class FitModel { automatic, dynamic, inductance, both };

inline std::optional<FitModel> parse_fit_model(const std::string& s) {
  if (s == "auto") return FitModel::automatic;
  if (s == "dynamic") return FitModel::dynamic;
  if (s == "inductance") return FitModel::inductance;
  if (s == "both") return FitModel::both;
  return std::nullopt;
}

struct FitSettings {
  FitModel model = FitModel::automatic;
  ident::InductanceFitOptions inductance{};
  double holdout = 0.0;  // trailing fraction of samples kept out of the fit
};

struct ObserverOverrides {
  std::optional<double> sigma_F, sigma_Fdot, R, w_fit, w_dyn, w_reg, gamma, refine_tol,
      guard_fraction, guard_inflation;
  std::optional<int> grid_points;
};

struct RunConfig {
  std::string schema = kSchema;
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";
  int jobs = 1;
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> dynamic_params, inductance_params;
  control::Bundle bundle = control::Bundle::defaults();
  ObserverOverrides observer;
  FitSettings fit;
  std::vector<plant::Scenario> scenarios;
  std::string source_hash;  // FNV-1a of the config text ("" for built-in defaults)

  /// Recompute derived observer defaults after the plant, models or filter
  /// changed, then re-apply explicit overrides.
  void finalize();
  void validate() const;
};

namespace detail {

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

inline double num(const json& j, const char* key, const std::string& where) {
  if (!j[key].is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return j[key].get<double>();
}

inline void opt_num(const json& j, const char* key, const std::string& where, double& dst) {
  if (j.contains(key)) dst = num(j, key, where);
}

inline void opt_num(const json& j, const char* key, const std::string& where, std::optional<double>& dst) {
  if (j.contains(key)) dst = num(j, key, where);
}

inline int integer(const json& j, const char* key, const std::string& where) {
  if (!j[key].is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return j[key].get<int>();
}

inline std::uint64_t seed_value(const json& j, const char* key, const std::string& where) {
  if (!j[key].is_number_unsigned() && !(j[key].is_number_integer() && j[key].get<long long>() >= 0))
    throw ConfigError(where + "." + key + ": expected a non-negative integer");
  return j[key].get<std::uint64_t>();
}

inline std::string str(const json& j, const char* key, const std::string& where) {
  if (!j[key].is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return j[key].get<std::string>();
}

inline std::vector<double> num_list(const json& j, const char* key, const std::string& where) {
  if (!j[key].is_array()) throw ConfigError(where + "." + key + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : j[key]) {
    if (!v.is_number()) throw ConfigError(where + "." + key + ": expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace detail

/// Factory defaults for a scenario kind; tracking kinds also need the waveform
/// and frequency to pick their reference.
inline plant::Scenario scenario_defaults(plant::ScenarioKind kind, plant::Waveform w, double f_hz) {
  using plant::ScenarioKind;
  namespace sc = plant::scenarios;
  switch (kind) {
    case ScenarioKind::calibration_grid: return sc::calibration_grid();
    case ScenarioKind::isobaric_sweep: return sc::isobaric_sweep();
    case ScenarioKind::isometric_sweep: return sc::isometric_sweep();
    case ScenarioKind::cyclic_estimation: return sc::cyclic_estimation();
    case ScenarioKind::force_tracking: return sc::force_tracking(w, f_hz);
    case ScenarioKind::displacement_tracking: return sc::displacement_tracking(w, f_hz);
    case ScenarioKind::load_perturbation: return sc::load_perturbation();
  }
  throw ConfigError("unknown scenario kind");
}

inline plant::Scenario parse_scenario(const json& j, const std::string& where) {
  detail::check_keys(j, where,
                     {"kind", "name", "waveform", "amplitude", "offset", "frequency_hz", "duration_s",
                      "warmup_s", "hold_length", "load", "pressures", "length_ratios", "stretch_ratio",
                      "cycles", "cycle_period_s", "settle_s", "stretch_increment", "pressure_step",
                      "pressure_peak", "dwell_s", "load_events", "weights", "transition_s", "load_seed"});
  if (!j.contains("kind")) throw ConfigError(where + ": missing 'kind'");
  const std::string kind_name = detail::str(j, "kind", where);
  const auto kind = plant::parse_kind(kind_name);
  if (!kind) throw ConfigError(where + ": unknown scenario kind '" + kind_name + "'");

  plant::Waveform w = plant::Waveform::sine;
  if (j.contains("waveform")) {
    const std::string wn = detail::str(j, "waveform", where);
    const auto parsed = plant::parse_waveform(wn);
    if (!parsed) throw ConfigError(where + ": unknown waveform '" + wn + "'");
    w = *parsed;
  }
  double f = 0.2;
  detail::opt_num(j, "frequency_hz", where, f);
  plant::Scenario s = scenario_defaults(*kind, w, f);
  const bool explicit_duration = j.contains("duration_s");

  if (j.contains("name")) s.name = detail::str(j, "name", where);
  detail::opt_num(j, "amplitude", where, s.amplitude);
  detail::opt_num(j, "offset", where, s.offset);
  detail::opt_num(j, "duration_s", where, s.duration_s);
  detail::opt_num(j, "warmup_s", where, s.warmup_s);
  detail::opt_num(j, "hold_length", where, s.hold_length);
  detail::opt_num(j, "load", where, s.load);
  if (j.contains("pressures")) s.pressures = detail::num_list(j, "pressures", where);
  if (j.contains("length_ratios")) s.length_ratios = detail::num_list(j, "length_ratios", where);
  detail::opt_num(j, "stretch_ratio", where, s.stretch_ratio);
  if (j.contains("cycles")) s.cycles = detail::integer(j, "cycles", where);
  detail::opt_num(j, "cycle_period_s", where, s.cycle_period_s);
  detail::opt_num(j, "settle_s", where, s.settle_s);
  detail::opt_num(j, "stretch_increment", where, s.stretch_increment);
  detail::opt_num(j, "pressure_step", where, s.pressure_step);
  detail::opt_num(j, "pressure_peak", where, s.pressure_peak);
  detail::opt_num(j, "dwell_s", where, s.dwell_s);
  if (j.contains("load_events")) s.load_events = detail::integer(j, "load_events", where);
  if (j.contains("weights")) s.weights = detail::num_list(j, "weights", where);
  detail::opt_num(j, "transition_s", where, s.transition_s);
  if (j.contains("load_seed")) s.load_seed = detail::seed_value(j, "load_seed", where);
  // Tracking runs default to two periods after the warm-up.
  if (!explicit_duration && (s.kind == plant::ScenarioKind::force_tracking ||
                             s.kind == plant::ScenarioKind::displacement_tracking))
    s.duration_s = 2.0 / s.frequency_hz + s.warmup_s;
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return s;
}

inline void RunConfig::finalize() {
  auto& b = bundle;
  b.plant.seed = seed;
  b.filter.sample_rate_hz = b.plant.sensor_rate_hz;
  b.force_gains.rate_hz = b.displacement_gains.rate_hz = b.plant.control_rate_hz;
  const double dt = b.plant.sensor_dt();
  observer::ObserverConfig oc = observer::default_config(b.ind, b.plant.envelope, dt, b.plant.noise_L);
  const auto& o = observer;
  if (o.sigma_F || o.sigma_Fdot) {
    const double sF = o.sigma_F.value_or(std::sqrt(oc.Q(0, 0)) / dt);
    const double sFd = o.sigma_Fdot.value_or(std::sqrt(oc.Q(1, 1) / dt));
    oc.Q << (sF * dt) * (sF * dt), 0.0, 0.0, sFd * sFd * dt;
  }
  if (o.R) oc.R = *o.R;
  if (o.w_fit) oc.weights.w_fit = *o.w_fit;
  if (o.w_dyn) oc.weights.w_dyn = *o.w_dyn;
  if (o.w_reg) oc.weights.w_reg = *o.w_reg;
  if (o.gamma) oc.weights.gamma = *o.gamma;
  if (o.refine_tol) oc.refine_tol = *o.refine_tol;
  if (o.guard_fraction) oc.guard_fraction = *o.guard_fraction;
  if (o.guard_inflation) oc.guard_inflation = *o.guard_inflation;
  if (o.grid_points) oc.grid_points = *o.grid_points;
  b.observer = oc;
  fit.inductance.seed = seed;
}

inline void RunConfig::validate() const {
  if (schema != kSchema) throw ConfigError("unsupported schema '" + schema + "', expected '" + kSchema + "'");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (!(fit.holdout >= 0.0 && fit.holdout < 1.0)) throw ConfigError("fit.holdout must lie in [0, 1)");
  if (fit.inductance.starts < 1) throw ConfigError("fit.starts must be >= 1");
  if (fit.inductance.solver.max_iterations < 1) throw ConfigError("fit.max_iterations must be >= 1");
  if (fit.inductance.perturbation < 0.0) throw ConfigError("fit.perturbation must be >= 0");
  bundle.validate();
  for (const auto& p : {data, dynamic_params, inductance_params})
    if (p && !std::filesystem::exists(*p)) throw ConfigError("referenced file '" + p->string() + "' does not exist");
  for (const auto& s : scenarios) s.validate();
}

/// Parses a config document. Relative paths resolve against `base_dir`.
inline RunConfig parse(const json& j, const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  const std::string root = "config";
  check_keys(j, root,
             {"schema", "seed", "out", "jobs", "data", "params", "plant", "observer", "filter",
              "controller", "fit", "scenarios"});
  if (!j.contains("schema")) throw ConfigError("config: missing 'schema' (expected '" + std::string(kSchema) + "')");
  RunConfig c;
  c.schema = str(j, "schema", root);
  if (c.schema != kSchema)
    throw ConfigError("config: unsupported schema '" + c.schema + "', expected '" + kSchema + "'");
  if (j.contains("seed")) c.seed = seed_value(j, "seed", root);
  if (j.contains("out")) c.out = resolve(base_dir, str(j, "out", root));
  if (j.contains("jobs")) c.jobs = integer(j, "jobs", root);
  if (j.contains("data")) c.data = resolve(base_dir, str(j, "data", root));

  auto& b = c.bundle;
  if (j.contains("params")) {
    const json& p = j["params"];
    check_keys(p, "params", {"dynamic", "inductance"});
    if (p.contains("dynamic")) c.dynamic_params = resolve(base_dir, str(p, "dynamic", "params"));
    if (p.contains("inductance")) c.inductance_params = resolve(base_dir, str(p, "inductance", "params"));
  }

  if (j.contains("plant")) {
    const json& p = j["plant"];
    const std::string w = "plant";
    check_keys(p, w,
               {"valve_tau", "valve_gain", "noise_L", "noise_F", "noise_x", "sensor_rate_hz",
                "control_rate_hz", "hysteresis", "dynamic", "inductance"});
    opt_num(p, "valve_tau", w, b.plant.valve_tau);
    opt_num(p, "valve_gain", w, b.plant.valve_gain);
    opt_num(p, "noise_L", w, b.plant.noise_L);
    opt_num(p, "noise_F", w, b.plant.noise_F);
    opt_num(p, "noise_x", w, b.plant.noise_x);
    opt_num(p, "sensor_rate_hz", w, b.plant.sensor_rate_hz);
    opt_num(p, "control_rate_hz", w, b.plant.control_rate_hz);
    if (p.contains("hysteresis")) {
      if (!p["hysteresis"].is_array()) throw ConfigError("plant.hysteresis: expected an array");
      b.plant.hysteresis.clear();
      for (std::size_t i = 0; i < p["hysteresis"].size(); ++i) {
        const json& e = p["hysteresis"][i];
        const std::string we = "plant.hysteresis[" + std::to_string(i) + "]";
        check_keys(e, we, {"width", "weight"});
        if (!e.contains("width") || !e.contains("weight")) throw ConfigError(we + ": needs width and weight");
        b.plant.hysteresis.push_back({num(e, "width", we), num(e, "weight", we)});
      }
    }
    if (p.contains("dynamic")) b.plant.dyn = io::dynamic_from_json(p["dynamic"], "plant.dynamic");
    if (p.contains("inductance")) b.plant.ind = io::inductance_from_json(p["inductance"], "plant.inductance");
  }

  if (j.contains("filter")) {
    const json& f = j["filter"];
    check_keys(f, "filter", {"order", "cutoff_hz"});
    if (f.contains("order")) b.filter.order = integer(f, "order", "filter");
    opt_num(f, "cutoff_hz", "filter", b.filter.cutoff_hz);
  }

  if (j.contains("observer")) {
    const json& o = j["observer"];
    const std::string w = "observer";
    check_keys(o, w,
               {"sigma_F", "sigma_Fdot", "R", "w_fit", "w_dyn", "w_reg", "gamma", "grid_points",
                "refine_tol", "guard_fraction", "guard_inflation"});
    auto& ov = c.observer;
    opt_num(o, "sigma_F", w, ov.sigma_F);
    opt_num(o, "sigma_Fdot", w, ov.sigma_Fdot);
    opt_num(o, "R", w, ov.R);
    opt_num(o, "w_fit", w, ov.w_fit);
    opt_num(o, "w_dyn", w, ov.w_dyn);
    opt_num(o, "w_reg", w, ov.w_reg);
    opt_num(o, "gamma", w, ov.gamma);
    opt_num(o, "refine_tol", w, ov.refine_tol);
    opt_num(o, "guard_fraction", w, ov.guard_fraction);
    opt_num(o, "guard_inflation", w, ov.guard_inflation);
    if (o.contains("grid_points")) ov.grid_points = integer(o, "grid_points", w);
  }

  if (j.contains("controller")) {
    const json& k = j["controller"];
    const std::string w = "controller";
    check_keys(k, w, {"preset", "force", "displacement", "P_max"});
    if (k.contains("preset")) {
      const std::string preset = str(k, "preset", w);
      if (preset == "hardware") {
        b.force_gains = b.displacement_gains = control::PidGains::hardware();
      } else if (preset != "default") {
        throw ConfigError("controller.preset: expected 'default' or 'hardware'");
      }
    }
    auto gains = [&](const char* key, control::PidGains& g) {
      if (!k.contains(key)) return;
      const std::string wg = w + "." + key;
      check_keys(k[key], wg, {"kp", "ki", "kd"});
      opt_num(k[key], "kp", wg, g.kp);
      opt_num(k[key], "ki", wg, g.ki);
      opt_num(k[key], "kd", wg, g.kd);
    };
    gains("force", b.force_gains);
    gains("displacement", b.displacement_gains);
    opt_num(k, "P_max", w, b.P_max);
  }

  if (j.contains("fit")) {
    const json& f = j["fit"];
    check_keys(f, "fit", {"model", "starts", "perturbation", "holdout", "parallel", "max_iterations"});
    if (f.contains("model")) {
      const std::string m = str(f, "model", "fit");
      const auto parsed = parse_fit_model(m);
      if (!parsed) throw ConfigError("fit.model: expected auto, dynamic, inductance or both");
      c.fit.model = *parsed;
    }
    if (f.contains("starts")) c.fit.inductance.starts = integer(f, "starts", "fit");
    if (f.contains("max_iterations")) c.fit.inductance.solver.max_iterations = integer(f, "max_iterations", "fit");
    opt_num(f, "perturbation", "fit", c.fit.inductance.perturbation);
    opt_num(f, "holdout", "fit", c.fit.holdout);
    if (f.contains("parallel")) {
      if (!f["parallel"].is_boolean()) throw ConfigError("fit.parallel: expected true or false");
      c.fit.inductance.parallel = f["parallel"].get<bool>();
    }
  }

  if (j.contains("scenarios")) {
    if (!j["scenarios"].is_array()) throw ConfigError("scenarios: expected an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < j["scenarios"].size(); ++i) {
      auto s = parse_scenario(j["scenarios"][i], "scenarios[" + std::to_string(i) + "]");
      if (!names.insert(s.name).second) throw ConfigError("scenarios: duplicate name '" + s.name + "'");
      c.scenarios.push_back(std::move(s));
    }
  }
  return c;
}

/// Reads the referenced parameter files into the observer/controller models.
inline void load_models(RunConfig& c) {
  if (c.dynamic_params)
    c.bundle.dyn = io::dynamic_from_json(io::read_json(*c.dynamic_params), c.dynamic_params->string());
  if (c.inductance_params)
    c.bundle.ind = io::inductance_from_json(io::read_json(*c.inductance_params), c.inductance_params->string());
}

/// Loads, finalizes and validates a config file.
inline RunConfig load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const DataError&) {
    throw ConfigError("cannot open config '" + path.string() + "'");
  }
  RunConfig c = parse(io::parse_json(text, path.string()), path.parent_path());
  c.source_hash = io::fnv1a_hex(text);
  load_models(c);
  c.finalize();
  c.validate();
  return c;
}

/// Built-in defaults, as if from an empty config.
inline RunConfig defaults() {
  RunConfig c;
  c.finalize();
  return c;
}

inline json scenario_json(const plant::Scenario& s) {
  return {{"name", s.name},
          {"kind", plant::to_string(s.kind)},
          {"waveform", plant::to_string(s.waveform)},
          {"amplitude", s.amplitude},
          {"offset", s.offset},
          {"frequency_hz", s.frequency_hz},
          {"duration_s", s.duration_s},
          {"warmup_s", s.warmup_s},
          {"hold_length", s.hold_length},
          {"load", s.load},
          {"pressures", s.pressures},
          {"length_ratios", s.length_ratios},
          {"stretch_ratio", s.stretch_ratio},
          {"cycles", s.cycles},
          {"cycle_period_s", s.cycle_period_s},
          {"settle_s", s.settle_s},
          {"stretch_increment", s.stretch_increment},
          {"pressure_step", s.pressure_step},
          {"pressure_peak", s.pressure_peak},
          {"dwell_s", s.dwell_s},
          {"load_events", s.load_events},
          {"weights", s.weights},
          {"transition_s", s.transition_s},
          {"load_seed", s.load_seed}};
}

/// Effective configuration as JSON (written next to outputs for provenance).
inline json effective_json(const RunConfig& c) {
  const auto& b = c.bundle;
  json hyst = json::array();
  for (const auto& h : b.plant.hysteresis) hyst.push_back({{"width", h.width}, {"weight", h.weight}});
  auto gains = [](const control::PidGains& g) { return json{{"kp", g.kp}, {"ki", g.ki}, {"kd", g.kd}}; };
  json j = {
      {"schema", c.schema},
      {"seed", c.seed},
      {"plant",
       {{"valve_tau", b.plant.valve_tau},
        {"valve_gain", b.plant.valve_gain},
        {"noise_L", b.plant.noise_L},
        {"noise_F", b.plant.noise_F},
        {"noise_x", b.plant.noise_x},
        {"sensor_rate_hz", b.plant.sensor_rate_hz},
        {"control_rate_hz", b.plant.control_rate_hz},
        {"hysteresis", hyst},
        {"dynamic", io::to_json(b.plant.dyn)},
        {"inductance", io::to_json(b.plant.ind)}}},
      {"filter", {{"order", b.filter.order}, {"cutoff_hz", b.filter.cutoff_hz}, {"sample_rate_hz", b.filter.sample_rate_hz}}},
      {"observer",
       {{"Q", {b.observer.Q(0, 0), b.observer.Q(1, 1)}},
        {"R", b.observer.R},
        {"w_fit", b.observer.weights.w_fit},
        {"w_dyn", b.observer.weights.w_dyn},
        {"w_reg", b.observer.weights.w_reg},
        {"gamma", b.observer.weights.gamma},
        {"grid_points", b.observer.grid_points},
        {"refine_tol", b.observer.refine_tol},
        {"guard_fraction", b.observer.guard_fraction},
        {"guard_inflation", b.observer.guard_inflation}}},
      {"controller", {{"force", gains(b.force_gains)}, {"displacement", gains(b.displacement_gains)}, {"P_max", b.P_max}}},
      {"models", {{"dynamic", io::to_json(b.dyn)}, {"inductance", io::to_json(b.ind)}}},
  };
  static constexpr const char* model_names[] = {"auto", "dynamic", "inductance", "both"};
  j["fit"] = {{"model", model_names[static_cast<int>(c.fit.model)]},
              {"starts", c.fit.inductance.starts},
              {"perturbation", c.fit.inductance.perturbation},
              {"holdout", c.fit.holdout},
              {"max_iterations", c.fit.inductance.solver.max_iterations}};
  j["scenarios"] = json::array();
  for (const auto& s : c.scenarios) j["scenarios"].push_back(scenario_json(s));
  return j;
}

}  // namespace selfsense::config
