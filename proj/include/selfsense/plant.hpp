#pragma once

// Synthetic actuator used as ground truth.
//
// Force: the linear model plus a Prandtl-Ishlinskii loop built from play
// operators acting on the elongation u = x - x0,
//
//   F = k u + c P + sum_i w_i (u - play_i(u)),   clamped to F >= 0.
//
// Each play element contributes +w r on loading and -w r on unloading, so the
// loop is centred on the linear model. Pressure follows the command through a
// first-order valve lag. Inductance is a function of (F, P) only.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "selfsense/errors.hpp"
#include "selfsense/ident.hpp"
#include "selfsense/model.hpp"

namespace selfsense::plant {

struct PlayElement {
  double width = 0.0;   // m
  double weight = 0.0;  // N/m
};

struct PlantConfig {
  model::DynamicParams dyn{};
  model::InductanceParams ind{};
  std::vector<PlayElement> hysteresis;
  double valve_tau = 0.1;    // s
  double valve_gain = 0.8;    // steady-state P / P_cmd
  double noise_L = 0.01;     // uH
  double noise_F = 0.02;     // N, load cell
  double noise_x = 2e-5;     // m, laser displacement sensor
  std::uint64_t seed = 1;
  double sensor_rate_hz = 100.0;
  double control_rate_hz = 20.0;
  model::OperatingEnvelope envelope{};

  int decimation() const {
    return static_cast<int>(std::lround(sensor_rate_hz / control_rate_hz));
  }
  double sensor_dt() const { return 1.0 / sensor_rate_hz; }

  void validate() const {
    dyn.validate();
    ind.validate();
    envelope.validate();
    for (const auto& h : hysteresis)
      if (h.width < 0.0 || h.weight < 0.0)
        throw ConfigError("play elements need non-negative width and weight");
    if (valve_tau < 0.0) throw ConfigError("valve_tau must be >= 0");
    if (!(valve_gain > 0.0)) throw ConfigError("valve_gain must be positive");
    if (noise_L < 0.0 || noise_F < 0.0 || noise_x < 0.0)
      throw ConfigError("noise levels must be >= 0");
    if (!(sensor_rate_hz > 0.0) || !(control_rate_hz > 0.0) || control_rate_hz > sensor_rate_hz)
      throw ConfigError("rates must satisfy 0 < control_rate <= sensor_rate");
    const double ratio = sensor_rate_hz / control_rate_hz;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
      throw ConfigError("sensor rate must be an integer multiple of the control rate");
  }
};

/// Frozen ten-coefficient inductance map: rising-then-falling in F at every
/// pressure, peak moving from 1.5 N (0 MPa) to about 2.15 N (0.65 MPa), zero-force
/// inductance 4.65-4.75 uH, peak inductance 5.2-5.4 uH.
inline model::InductanceParams reference_inductance_params() {
  return model::InductanceParams{{
      -0.185, 0.51,    // lambda1
      0.30, 1.00,      // lambda2
      0.0903, -0.0988, // lambda3
      0.0, 3.00,       // lambda4
      0.15, 4.65,      // lambda5
  }};
}

/// Four play elements whose loop adds at most +-0.019 N to the linear model.
inline std::vector<PlayElement> default_hysteresis() {
  return {{0.0005, 2.5}, {0.001, 2.5}, {0.002, 2.5}, {0.004, 2.5}};
}

inline PlantConfig default_config() {
  PlantConfig c;
  c.ind = reference_inductance_params();
  c.hysteresis = default_hysteresis();
  return c;
}

struct PlantState {
  double x = 0.1;  // m
  double P = 0.0;  // MPa, after the valve
  std::vector<double> play;  // play outputs, elongation units
  double t = 0.0;
};

enum class Constraint { isometric, isotonic };

struct Command {
  double P_cmd = 0.0;
  Constraint constraint = Constraint::isometric;
  double x_cmd = 0.1;   // isometric
  double F_load = 0.0;  // isotonic
};

struct Truth {
  double F = 0.0, x = 0.0, L_clean = 0.0, P = 0.0;
};

struct Sensed {
  double L = 0.0, F_loadcell = 0.0, x_laser = 0.0;
};

struct StepOutput {
  Truth truth;
  Sensed sensed;
};

inline double play_update(double prev, double u, double width) {
  return std::clamp(prev, u - width, u + width);
}

/// Force at length x given the play outputs before the move; `play_out`
/// receives the updated play outputs.
inline double hysteretic_force(const PlantConfig& cfg, const std::vector<double>& play_prev,
                               double x, double P, std::vector<double>* play_out = nullptr) {
  const double u = x - cfg.dyn.x0;
  double F = model::eval_dynamic_force(cfg.dyn, x, P);
  for (std::size_t i = 0; i < cfg.hysteresis.size(); ++i) {
    const double p = play_update(play_prev[i], u, cfg.hysteresis[i].width);
    F += cfg.hysteresis[i].weight * (u - p);
    if (play_out) (*play_out)[i] = p;
  }
  return std::max(0.0, F);
}

/// Play states placed on the loading (or unloading) branch at length x.
inline PlantState initial_state(const PlantConfig& cfg, double x, double P, bool loading = true) {
  PlantState s;
  s.x = x;
  s.P = P;
  const double u = x - cfg.dyn.x0;
  for (const auto& h : cfg.hysteresis) s.play.push_back(loading ? u - h.width : u + h.width);
  return s;
}

struct NoiseSource {
  std::mt19937_64 rng;
  std::normal_distribution<double> unit{0.0, 1.0};
  explicit NoiseSource(std::uint64_t seed) : rng(seed) {}
  double operator()() { return unit(rng); }
};

/// Length balancing F_load under isotonic loading, by bisection to 1e-9 m.
inline double solve_isotonic_length(const PlantConfig& cfg, const std::vector<double>& play_prev,
                                    double P, double F_load) {
  double lo = cfg.envelope.x_min, hi = cfg.envelope.x_max;
  const double F_lo = hysteretic_force(cfg, play_prev, lo, P);
  const double F_hi = hysteretic_force(cfg, play_prev, hi, P);
  if (F_load < F_lo || F_load > F_hi)
    throw InfeasibleError("isotonic load " + std::to_string(F_load) +
                          " N unreachable inside the length envelope");
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    if (hysteretic_force(cfg, play_prev, mid, P) < F_load) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline StepOutput step(PlantState& s, const Command& cmd, double dt, const PlantConfig& cfg,
                       NoiseSource& noise) {
  if (!(dt > 0.0)) throw ConfigError("plant step needs dt > 0");

  const double target = cfg.valve_gain * std::max(0.0, cmd.P_cmd);
  if (cfg.valve_tau > 0.0) s.P += (target - s.P) * (1.0 - std::exp(-dt / cfg.valve_tau));
  else s.P = target;
  s.P = std::max(0.0, s.P);

  const double x = cmd.constraint == Constraint::isometric
                       ? cmd.x_cmd
                       : solve_isotonic_length(cfg, s.play, s.P, cmd.F_load);
  std::vector<double> play_next(s.play.size());
  const double F = hysteretic_force(cfg, s.play, x, s.P, &play_next);
  s.play = std::move(play_next);
  s.x = x;
  s.t += dt;

  StepOutput out;
  out.truth = {F, x, model::eval_inductance(cfg.ind, F, s.P), s.P};
  // Every channel draws each step so runs sharing a seed share noise streams.
  const double nL = noise(), nF = noise(), nx = noise();
  out.sensed.L = out.truth.L_clean + cfg.noise_L * nL;
  out.sensed.F_loadcell = F + cfg.noise_F * nF;
  out.sensed.x_laser = x + cfg.noise_x * nx;
  return out;
}

/// Stateful wrapper: configuration, state and its own seeded noise stream.
class Plant {
 public:
  Plant(PlantConfig cfg, PlantState init) : cfg_(std::move(cfg)), state_(std::move(init)), noise_(cfg_.seed) {
    cfg_.validate();
    if (state_.play.size() != cfg_.hysteresis.size())
      state_.play.assign(cfg_.hysteresis.size(), state_.x - cfg_.dyn.x0);
  }

  StepOutput step(const Command& cmd) { return plant::step(state_, cmd, cfg_.sensor_dt(), cfg_, noise_); }

  const PlantState& state() const { return state_; }
  const PlantConfig& config() const { return cfg_; }

 private:
  PlantConfig cfg_;
  PlantState state_;
  NoiseSource noise_;
};

// ---------------------------------------------------------------------------
// Scenarios

enum class ScenarioKind {
  isobaric_sweep,
  isometric_sweep,
  calibration_grid,
  cyclic_estimation,
  force_tracking,
  displacement_tracking,
  load_perturbation,
};

enum class Waveform { sine, triangle, steps };

inline std::optional<ScenarioKind> parse_kind(const std::string& s) {
  if (s == "isobaric_sweep") return ScenarioKind::isobaric_sweep;
  if (s == "isometric_sweep") return ScenarioKind::isometric_sweep;
  if (s == "calibration_grid") return ScenarioKind::calibration_grid;
  if (s == "cyclic_estimation") return ScenarioKind::cyclic_estimation;
  if (s == "force_tracking") return ScenarioKind::force_tracking;
  if (s == "displacement_tracking") return ScenarioKind::displacement_tracking;
  if (s == "load_perturbation") return ScenarioKind::load_perturbation;
  return std::nullopt;
}

inline const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::isobaric_sweep: return "isobaric_sweep";
    case ScenarioKind::isometric_sweep: return "isometric_sweep";
    case ScenarioKind::calibration_grid: return "calibration_grid";
    case ScenarioKind::cyclic_estimation: return "cyclic_estimation";
    case ScenarioKind::force_tracking: return "force_tracking";
    case ScenarioKind::displacement_tracking: return "displacement_tracking";
    case ScenarioKind::load_perturbation: return "load_perturbation";
  }
  return "?";
}

inline std::optional<Waveform> parse_waveform(const std::string& s) {
  if (s == "sine") return Waveform::sine;
  if (s == "triangle") return Waveform::triangle;
  if (s == "steps") return Waveform::steps;
  return std::nullopt;
}

inline const char* to_string(Waveform w) {
  switch (w) {
    case Waveform::sine: return "sine";
    case Waveform::triangle: return "triangle";
    case Waveform::steps: return "steps";
  }
  return "?";
}

/// Unit-amplitude periodic shape, zero at t = 0 and rising.
inline double waveform_value(Waveform w, double phase_cycles) {
  const double ph = phase_cycles - std::floor(phase_cycles);
  switch (w) {
    case Waveform::sine: return std::sin(2.0 * std::numbers::pi * phase_cycles);
    case Waveform::triangle:
      if (ph < 0.25) return 4.0 * ph;
      if (ph < 0.75) return 2.0 - 4.0 * ph;
      return 4.0 * ph - 4.0;
    case Waveform::steps: return ph < 0.5 ? 1.0 : -1.0;
  }
  return 0.0;
}

struct Scenario {
  std::string name;
  ScenarioKind kind = ScenarioKind::calibration_grid;

  // Tracking references.
  Waveform waveform = Waveform::sine;
  double amplitude = 0.3;     // N or m
  double offset = 1.8;        // N or m
  double frequency_hz = 0.2;
  double duration_s = 20.0;
  double warmup_s = 2.0;      // reference held at offset; excluded from metrics

  // Isometric fixture / isotonic load.
  double hold_length = 0.13;  // m
  double load = 1.0;          // N

  // Sweeps.
  std::vector<double> pressures;        // MPa levels
  std::vector<double> length_ratios;    // of x0, isometric sweep
  double stretch_ratio = 1.7;
  int cycles = 3;
  double cycle_period_s = 10.0;
  double settle_s = 1.0;
  double stretch_increment = 0.02;      // of x0, isobaric staircase
  double pressure_step = 0.02;          // MPa, isometric staircase
  double pressure_peak = 0.66;          // MPa
  double dwell_s = 0.1;

  // Random loads.
  int load_events = 12;
  std::vector<double> weights = {0.098, 0.196, 0.294};  // N (10, 20, 30 g)
  double transition_s = 1.0;
  std::uint64_t load_seed = 7;

  double reference(double t) const {
    if (t < warmup_s) return offset;
    return offset + amplitude * waveform_value(waveform, frequency_hz * (t - warmup_s));
  }

  void validate() const {
    if (!(duration_s > 0.0)) throw ConfigError("scenario '" + name + "': duration must be > 0");
    if (kind == ScenarioKind::force_tracking || kind == ScenarioKind::displacement_tracking) {
      if (!(frequency_hz > 0.0)) throw ConfigError("scenario '" + name + "': frequency must be > 0");
      if (amplitude < 0.0) throw ConfigError("scenario '" + name + "': amplitude must be >= 0");
    }
    if (warmup_s < 0.0) throw ConfigError("scenario '" + name + "': warmup must be >= 0");
    if ((kind == ScenarioKind::calibration_grid || kind == ScenarioKind::isobaric_sweep ||
         kind == ScenarioKind::cyclic_estimation) && pressures.empty())
      throw ConfigError("scenario '" + name + "': pressure levels required");
    if (kind == ScenarioKind::isometric_sweep && length_ratios.empty())
      throw ConfigError("scenario '" + name + "': length ratios required");
    if (cycles < 1) throw ConfigError("scenario '" + name + "': cycles must be >= 1");
    for (double p : pressures)
      if (p < 0.0) throw ConfigError("scenario '" + name + "': negative pressure level");
    if (kind == ScenarioKind::load_perturbation && (weights.empty() || load_events < 0))
      throw ConfigError("scenario '" + name + "': load events need weights");
  }
};

inline std::vector<double> pressure_levels(double hi = 0.65, double step = 0.05) {
  std::vector<double> out;
  for (int i = 0; i * step <= hi + 1e-12; ++i) out.push_back(i * step);
  return out;
}

namespace scenarios {

inline Scenario calibration_grid() {
  Scenario s;
  s.name = "calibration_grid";
  s.kind = ScenarioKind::calibration_grid;
  s.pressures = pressure_levels();
  s.cycles = 3;
  s.stretch_ratio = 1.7;
  s.cycle_period_s = 8.0;
  s.duration_s = 1.0;  // derived from the sweep
  return s;
}

inline Scenario isobaric_sweep() {
  Scenario s = calibration_grid();
  s.name = "isobaric_sweep";
  s.kind = ScenarioKind::isobaric_sweep;
  s.dwell_s = 0.1;
  return s;
}

inline Scenario isometric_sweep() {
  Scenario s;
  s.name = "isometric_sweep";
  s.kind = ScenarioKind::isometric_sweep;
  for (int i = 0; i <= 14; ++i) s.length_ratios.push_back(1.0 + 0.05 * i);
  s.cycles = 5;
  s.pressure_step = 0.02;
  s.pressure_peak = 0.66;
  s.dwell_s = 0.05;
  return s;
}

inline Scenario cyclic_estimation() {
  Scenario s;
  s.name = "cyclic_estimation";
  s.kind = ScenarioKind::cyclic_estimation;
  s.pressures = pressure_levels();
  s.cycles = 1;
  s.stretch_ratio = 1.7;
  s.cycle_period_s = 30.0;
  return s;
}

inline Scenario force_tracking(Waveform w, double f_hz) {
  Scenario s;
  s.name = std::string("force_") + to_string(w) + "_" + (f_hz >= 0.1 ? "0.2" : "0.05") + "Hz";
  s.kind = ScenarioKind::force_tracking;
  s.waveform = w;
  s.frequency_hz = f_hz;
  s.hold_length = 0.11;
  s.offset = 0.85;
  s.amplitude = 0.3;
  s.duration_s = 2.0 / f_hz + s.warmup_s;
  return s;
}

inline Scenario displacement_tracking(Waveform w, double f_hz) {
  Scenario s;
  s.name = std::string("displacement_") + to_string(w) + "_" + (f_hz >= 0.1 ? "0.2" : "0.05") + "Hz";
  s.kind = ScenarioKind::displacement_tracking;
  s.waveform = w;
  s.frequency_hz = f_hz;
  s.load = 1.0;
  s.offset = 0.114;
  s.amplitude = 0.008;
  s.duration_s = 2.0 / f_hz + s.warmup_s;
  return s;
}

inline Scenario load_perturbation() {
  Scenario s;
  s.name = "load_perturbation";
  s.kind = ScenarioKind::load_perturbation;
  s.hold_length = 0.115;
  s.load = 0.6;
  s.duration_s = 60.0;
  s.warmup_s = 2.0;
  return s;
}

}  // namespace scenarios

struct LoadEvent {
  double t = 0.0;
  double delta = 0.0;  // N, signed
};

/// Seeded random schedule of weights applied to and removed from the hanger.
inline std::vector<LoadEvent> load_schedule(const Scenario& s) {
  std::mt19937_64 rng(s.load_seed);
  const double t0 = s.warmup_s + 1.0;
  const double t1 = s.duration_s - 2.0;
  std::vector<LoadEvent> ev;
  if (s.load_events <= 0 || t1 <= t0) return ev;
  const double slot = (t1 - t0) / s.load_events;
  std::uniform_real_distribution<double> jitter(0.15, 0.85);
  std::uniform_int_distribution<std::size_t> pick(0, s.weights.size() - 1);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> hanging;
  for (int i = 0; i < s.load_events; ++i) {
    const double t = t0 + slot * (i + jitter(rng));
    const std::size_t w = pick(rng);
    // At most two weights hang at once.
    const bool remove = hanging.size() == 2 || (!hanging.empty() && coin(rng));
    if (remove) {
      ev.push_back({t, -hanging.back()});
      hanging.pop_back();
    } else {
      hanging.push_back(s.weights[w]);
      ev.push_back({t, s.weights[w]});
    }
  }
  return ev;
}

/// External load at time t: base load plus raised-cosine transitions.
inline double load_at(const Scenario& s, const std::vector<LoadEvent>& ev, double t) {
  double F = s.load;
  for (const auto& e : ev) {
    if (t <= e.t) continue;
    const double a = s.transition_s > 0.0 ? std::min(1.0, (t - e.t) / s.transition_s) : 1.0;
    F += e.delta * 0.5 * (1.0 - std::cos(std::numbers::pi * a));
  }
  return F;
}

namespace detail {

struct Recorder {
  ident::Dataset ds;
  std::vector<double> F_true, L_clean, P_cmd, x_laser;

  void push(const StepOutput& o, double t, double p_cmd) {
    ident::Sample s;
    s.t = t;
    s.P = o.truth.P;
    s.L = o.sensed.L;
    s.F = o.sensed.F_loadcell;
    s.x = o.truth.x;
    ds.samples.push_back(s);
    F_true.push_back(o.truth.F);
    L_clean.push_back(o.truth.L_clean);
    P_cmd.push_back(p_cmd);
    x_laser.push_back(o.sensed.x_laser);
  }

  ident::Dataset finish(const Scenario& s, const PlantConfig& cfg) {
    ds.extra["F_true"] = std::move(F_true);
    ds.extra["L_clean"] = std::move(L_clean);
    ds.extra["P_cmd"] = std::move(P_cmd);
    ds.extra["x_laser"] = std::move(x_laser);
    ds.meta["scenario"] = s.name;
    ds.meta["kind"] = to_string(s.kind);
    ds.meta["seed"] = std::to_string(cfg.seed);
    return std::move(ds);
  }
};

// Isometric segment: x moves linearly from x_a to x_b over `duration` at fixed P_cmd.
inline void ramp(Plant& plant, Recorder& rec, double P_cmd, double x_a, double x_b,
                 double duration) {
  const double dt = plant.config().sensor_dt();
  const int n = std::max(1, static_cast<int>(std::lround(duration / dt)));
  for (int i = 1; i <= n; ++i) {
    const double x = x_a + (x_b - x_a) * static_cast<double>(i) / n;
    const auto o = plant.step({P_cmd, Constraint::isometric, x, 0.0});
    rec.push(o, plant.state().t, P_cmd);
  }
}

inline void hold(Plant& plant, Recorder& rec, double P_cmd, double x, double duration) {
  ramp(plant, rec, P_cmd, x, x, duration);
}

}  // namespace detail

/// Plant-only scenarios. Tracking kinds need a controller (see control.hpp).
inline ident::Dataset run_scenario(const Scenario& s, const PlantConfig& cfg) {
  s.validate();
  cfg.validate();
  const auto& d = cfg.dyn;
  const double x_top = s.stretch_ratio * d.x0;
  auto zero_force_length = [&](double P) { return d.x0 - d.c * P / d.k; };

  // Sweep levels are set on the pressure gauge, i.e. as actual pressures.
  auto gauge = [&](double P) { return P / cfg.valve_gain; };

  detail::Recorder rec;
  switch (s.kind) {
    case ScenarioKind::calibration_grid:
    case ScenarioKind::cyclic_estimation: {
      Plant plant(cfg, initial_state(cfg, zero_force_length(0.0), 0.0, false));
      for (double P : s.pressures) {
        const double x_lo = zero_force_length(P);
        const double x_now = plant.state().x;
        if (s.kind == ScenarioKind::calibration_grid) {
          detail::ramp(plant, rec, gauge(P), x_now, x_lo, s.settle_s);
        }
        const double half = 0.5 * s.cycle_period_s;
        double x_start = s.kind == ScenarioKind::calibration_grid ? x_lo : x_now;
        for (int c = 0; c < s.cycles; ++c) {
          detail::ramp(plant, rec, gauge(P), x_start, x_top, half);
          detail::ramp(plant, rec, gauge(P), x_top, x_lo, half);
          x_start = x_lo;
        }
      }
      break;
    }
    case ScenarioKind::isobaric_sweep: {
      Plant plant(cfg, initial_state(cfg, zero_force_length(0.0), 0.0, false));
      for (double P : s.pressures) {
        const double x_lo = zero_force_length(P);
        detail::ramp(plant, rec, gauge(P), plant.state().x, x_lo, s.settle_s);
        const double inc = s.stretch_increment * d.x0;
        const int n = std::max(1, static_cast<int>(std::ceil((x_top - x_lo) / inc)));
        for (int c = 0; c < s.cycles; ++c) {
          for (int i = 1; i <= n; ++i)
            detail::hold(plant, rec, gauge(P), std::min(x_top, x_lo + i * inc), s.dwell_s);
          for (int i = n - 1; i >= 0; --i)
            detail::hold(plant, rec, gauge(P), x_lo + i * inc, s.dwell_s);
        }
      }
      break;
    }
    case ScenarioKind::isometric_sweep: {
      Plant plant(cfg, initial_state(cfg, d.x0, 0.0, true));
      const int n = static_cast<int>(std::lround(s.pressure_peak / s.pressure_step));
      for (double ratio : s.length_ratios) {
        const double x = ratio * d.x0;
        detail::ramp(plant, rec, gauge(0.0), plant.state().x, x, s.settle_s);
        for (int c = 0; c < s.cycles; ++c) {
          for (int i = 1; i <= n; ++i) detail::hold(plant, rec, gauge(i * s.pressure_step), x, s.dwell_s);
          for (int i = n - 1; i >= 0; --i) detail::hold(plant, rec, gauge(i * s.pressure_step), x, s.dwell_s);
        }
      }
      break;
    }
    case ScenarioKind::load_perturbation: {
      // Pressure set from the known load so the length stays near hold_length.
      const auto events = load_schedule(s);
      auto p_for = [&](double F) { return std::max(0.0, (F - d.k * (s.hold_length - d.x0)) / d.c) / cfg.valve_gain; };
      const double P0 = cfg.valve_gain * p_for(s.load);
      PlantState init = initial_state(cfg, s.hold_length, P0, true);
      Plant plant(cfg, init);
      const double dt = cfg.sensor_dt();
      const int n = static_cast<int>(std::lround(s.duration_s / dt));
      for (int i = 1; i <= n; ++i) {
        const double t = i * dt;
        const double F_load = load_at(s, events, t);
        const double P_cmd = p_for(F_load);
        const auto o = plant.step({P_cmd, Constraint::isotonic, 0.0, F_load});
        rec.push(o, plant.state().t, P_cmd);
      }
      break;
    }
    case ScenarioKind::force_tracking:
    case ScenarioKind::displacement_tracking:
      throw ConfigError("scenario '" + s.name + "': tracking scenarios run through the controller");
  }
  return rec.finish(s, cfg);
}

}  // namespace selfsense::plant
