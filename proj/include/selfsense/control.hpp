#pragma once

// PID feedback plus model-based feedforward, and the harness that compares
// open-loop, external-sensor feedback and self-sensing feedback on identical
// plants, references and noise streams.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "selfsense/dsp.hpp"
#include "selfsense/errors.hpp"
#include "selfsense/ident.hpp"
#include "selfsense/model.hpp"
#include "selfsense/observer.hpp"
#include "selfsense/plant.hpp"

namespace selfsense::control {

/// Error units: N in force mode, mm in displacement mode; output in MPa.
struct PidGains {
  double kp = 0.0, ki = 0.0, kd = 0.0;
  double rate_hz = 20.0;

  void validate() const {
    if (kp < 0.0 || ki < 0.0 || kd < 0.0) throw ConfigError("PID gains must be >= 0");
    if (!(rate_hz > 0.0)) throw ConfigError("PID rate must be positive");
  }

  // Gains tuned on the physical rig; too gentle for this plant over 20-60 s runs.
  static PidGains hardware() { return {0.027, 0.001, 0.003, 20.0}; }
  static PidGains force_default() { return {0.35, 2.0, 0.0, 20.0}; }
  static PidGains displacement_default() { return {0.025, 0.12, 0.0, 20.0}; }
};

struct ControllerState {
  double integral = 0.0;  // MPa, already multiplied by ki
  double prev_error = 0.0;
  double clamp_lo = -0.65;
  double clamp_hi = 0.65;
};

/// Positional PID: rectangular integration, backward-difference derivative on
/// the error, integral term clamped to [clamp_lo, clamp_hi].
inline double pid_step(ControllerState& s, double error, const PidGains& g) {
  const double dt = 1.0 / g.rate_hz;
  s.integral = std::clamp(s.integral + g.ki * error * dt, s.clamp_lo, s.clamp_hi);
  const double out = g.kp * error + s.integral + g.kd * (error - s.prev_error) / dt;
  s.prev_error = error;
  return out;
}

struct ForceTarget {
  double F_ref = 0.0;  // N
  double x = 0.1;      // m, fixture length
};

struct DisplacementTarget {
  double x_ref = 0.1;   // m
  double F_load = 0.0;  // N
};

struct Feedforward {
  double P = 0.0;
  bool saturated = false;
};

inline Feedforward clamp_pressure(double P, double P_max) {
  if (P < 0.0) return {0.0, true};
  if (P > P_max) return {P_max, true};
  return {P, false};
}

inline Feedforward feedforward_pressure(const model::DynamicParams& d, const ForceTarget& t,
                                        double P_max = 0.65) {
  if (std::abs(d.c) < 1e-12) throw DegenerateError("pressure coefficient c is degenerate");
  return clamp_pressure((t.F_ref - d.k * (t.x - d.x0)) / d.c, P_max);
}

inline Feedforward feedforward_pressure(const model::DynamicParams& d, const DisplacementTarget& t,
                                        double P_max = 0.65) {
  if (std::abs(d.c) < 1e-12) throw DegenerateError("pressure coefficient c is degenerate");
  return clamp_pressure((t.F_load - d.k * (t.x_ref - d.x0)) / d.c, P_max);
}

enum class Mode { open_loop, sensor_fb, self_sensing };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::open_loop: return "open_loop";
    case Mode::sensor_fb: return "sensor_fb";
    case Mode::self_sensing: return "self_sensing";
  }
  return "?";
}

/// Everything a closed-loop run needs besides the scenario.
struct Bundle {
  plant::PlantConfig plant = plant::default_config();
  model::DynamicParams dyn{};           // controller / observer force model
  model::InductanceParams ind = plant::reference_inductance_params();
  observer::ObserverConfig observer{};  // dt must equal the sensor period
  dsp::FilterSpec filter{};
  PidGains force_gains = PidGains::force_default();
  PidGains displacement_gains = PidGains::displacement_default();
  double P_max = 0.65;

  static Bundle defaults() {
    Bundle b;
    b.observer = observer::default_config(b.ind, b.plant.envelope, b.plant.sensor_dt(), b.plant.noise_L);
    b.filter.sample_rate_hz = b.plant.sensor_rate_hz;
    return b;
  }

  void validate() const {
    plant.validate();
    dyn.validate();
    observer.validate();
    filter.validate();
    force_gains.validate();
    displacement_gains.validate();
    if (std::abs(observer.dt - plant.sensor_dt()) > 1e-12)
      throw ConfigError("observer dt must equal the sensor period");
    if (std::abs(filter.sample_rate_hz - plant.sensor_rate_hz) > 1e-9)
      throw ConfigError("filter sample rate must equal the sensor rate");
    if (!(P_max > 0.0)) throw ConfigError("P_max must be positive");
  }
};

/// Control-rate time series. reference/truth/estimate are in N (force mode)
/// or m (displacement mode).
struct TrackingResult {
  std::string scenario;
  Mode mode = Mode::open_loop;
  bool displacement = false;
  std::vector<double> t, reference, truth, estimate, measurement, P_cmd, P;
  std::vector<double> F_true, F_hat, x_true, x_hat;  // both channels, always
  std::vector<bool> saturated;
  std::size_t metric_begin = 0;  // first index after warm-up
  ident::ErrorStats metrics;     // truth vs reference
  std::optional<double> improvement;  // percent RMSE reduction vs open loop
};

inline ident::ErrorStats window_stats(const std::vector<double>& a, const std::vector<double>& b,
                                      std::size_t begin, std::size_t end) {
  return ident::error_stats(std::vector<double>(a.begin() + static_cast<std::ptrdiff_t>(begin),
                                                a.begin() + static_cast<std::ptrdiff_t>(end)),
                            std::vector<double>(b.begin() + static_cast<std::ptrdiff_t>(begin),
                                                b.begin() + static_cast<std::ptrdiff_t>(end)));
}

namespace detail {

struct LoopSetup {
  bool displacement = false;
  bool unknown_load = false;  // perturbation: controller only knows the base load
};

inline TrackingResult run_loop(const plant::Scenario& s, Mode mode, const Bundle& b,
                               LoopSetup setup) {
  b.validate();
  const auto& pc = b.plant;
  const int decim = pc.decimation();
  const double dt = pc.sensor_dt();
  const bool disp = setup.displacement;
  const PidGains& gains = disp ? b.displacement_gains : b.force_gains;
  const auto events = s.kind == plant::ScenarioKind::load_perturbation
                          ? plant::load_schedule(s)
                          : std::vector<plant::LoadEvent>{};
  auto load = [&](double t) { return events.empty() ? s.load : plant::load_at(s, events, t); };

  // Start at the feedforward pressure for the initial reference, steady state.
  double P0_cmd;
  plant::PlantState init;
  if (!disp) {
    P0_cmd = feedforward_pressure(b.dyn, ForceTarget{s.reference(0.0), s.hold_length}, b.P_max).P;
    init = plant::initial_state(pc, s.hold_length, pc.valve_gain * P0_cmd, true);
  } else {
    const double x_ref0 = s.kind == plant::ScenarioKind::load_perturbation ? s.hold_length : s.reference(0.0);
    P0_cmd = feedforward_pressure(b.dyn, DisplacementTarget{x_ref0, s.load}, b.P_max).P;
    const double P0 = pc.valve_gain * P0_cmd;
    std::vector<double> relaxed(pc.hysteresis.size(), x_ref0 - pc.dyn.x0);
    const double x_eq = plant::solve_isotonic_length(pc, relaxed, P0, s.load);
    init = plant::initial_state(pc, x_eq, P0, true);
  }
  plant::Plant plant(pc, init);

  const double F_init = plant::hysteretic_force(pc, plant.state().play, plant.state().x, plant.state().P);
  const double L_init = model::eval_inductance(pc.ind, F_init, plant.state().P);
  observer::Observer obs(b.ind, b.dyn, b.observer, b.filter);
  obs.reset(std::clamp(F_init, b.observer.envelope.F_min, b.observer.envelope.F_max), L_init);

  ControllerState cs;
  cs.clamp_lo = -b.P_max;
  cs.clamp_hi = b.P_max;

  TrackingResult r;
  r.scenario = s.name;
  r.mode = mode;
  r.displacement = disp;

  // Latest channels, refreshed every sensor step.
  double F_true = F_init, x_true = plant.state().x, F_cell = F_init, x_laser = x_true;
  double F_hat = F_init, x_hat = model::invert_dynamic_length(b.dyn, F_hat, plant.state().P);
  double P_now = plant.state().P;

  const int n_ctrl = static_cast<int>(std::lround(s.duration_s * pc.control_rate_hz));
  for (int k = 0; k < n_ctrl; ++k) {
    const double t = k / pc.control_rate_hz;
    const double ref = s.kind == plant::ScenarioKind::load_perturbation ? s.hold_length : s.reference(t);
    const double truth = disp ? x_true : F_true;
    const double est = disp ? x_hat : F_hat;
    const double meas = mode == Mode::self_sensing ? est : (disp ? x_laser : F_cell);

    const double F_known = setup.unknown_load ? s.load : load(t);
    const Feedforward ff = disp ? feedforward_pressure(b.dyn, DisplacementTarget{ref, F_known}, b.P_max)
                                : feedforward_pressure(b.dyn, ForceTarget{ref, s.hold_length}, b.P_max);
    double P_cmd = ff.P;
    bool sat = ff.saturated;
    if (mode != Mode::open_loop) {
      // Displacement errors are handled in mm; a longer actuator needs less pressure.
      const double err = disp ? -(ref - meas) * 1e3 : (ref - meas);
      const Feedforward total = clamp_pressure(ff.P + pid_step(cs, err, gains), b.P_max);
      P_cmd = total.P;
      sat = total.saturated;
    }

    r.t.push_back(t);
    r.reference.push_back(ref);
    r.truth.push_back(truth);
    r.estimate.push_back(est);
    r.measurement.push_back(meas);
    r.P_cmd.push_back(P_cmd);
    r.P.push_back(P_now);
    r.F_true.push_back(F_true);
    r.F_hat.push_back(F_hat);
    r.x_true.push_back(x_true);
    r.x_hat.push_back(x_hat);
    r.saturated.push_back(sat);

    for (int j = 0; j < decim; ++j) {
      const double ts = t + (j + 1) * dt;
      plant::Command cmd;
      cmd.P_cmd = P_cmd;
      if (disp) {
        cmd.constraint = plant::Constraint::isotonic;
        cmd.F_load = load(ts);
      } else {
        cmd.constraint = plant::Constraint::isometric;
        cmd.x_cmd = s.hold_length;
      }
      const auto o = plant.step(cmd);
      const auto e = obs.step(o.sensed.L, o.truth.P);
      F_true = o.truth.F;
      x_true = o.truth.x;
      F_cell = o.sensed.F_loadcell;
      x_laser = o.sensed.x_laser;
      F_hat = e.F_hat;
      x_hat = e.x_hat;
      P_now = o.truth.P;
    }
  }

  r.metric_begin = static_cast<std::size_t>(std::ceil(s.warmup_s * pc.control_rate_hz));
  r.metric_begin = std::min(r.metric_begin, r.t.empty() ? 0 : r.t.size() - 1);
  r.metrics = window_stats(r.truth, r.reference, r.metric_begin, r.t.size());
  return r;
}

}  // namespace detail

inline TrackingResult run_tracking(const plant::Scenario& s, Mode mode, const Bundle& b) {
  s.validate();
  if (s.kind != plant::ScenarioKind::force_tracking &&
      s.kind != plant::ScenarioKind::displacement_tracking)
    throw ConfigError("scenario '" + s.name + "' is not a tracking scenario");
  return detail::run_loop(s, mode, b,
                          {s.kind == plant::ScenarioKind::displacement_tracking, false});
}

/// Percent RMSE reduction relative to the open-loop run.
inline double improvement(const TrackingResult& mode, const TrackingResult& open_loop) {
  return 100.0 * (1.0 - mode.metrics.rmse / open_loop.metrics.rmse);
}

struct TrackingGroup {
  TrackingResult open_loop, sensor_fb, self_sensing;
};

/// All three strategies on the same scenario, with improvements filled in.
inline TrackingGroup run_tracking_group(const plant::Scenario& s, const Bundle& b) {
  TrackingGroup g{run_tracking(s, Mode::open_loop, b), run_tracking(s, Mode::sensor_fb, b),
                  run_tracking(s, Mode::self_sensing, b)};
  g.open_loop.improvement = 0.0;
  g.sensor_fb.improvement = improvement(g.sensor_fb, g.open_loop);
  g.self_sensing.improvement = improvement(g.self_sensing, g.open_loop);
  return g;
}

struct PerturbationResult {
  TrackingResult run;
  std::vector<double> load;    // applied external load, control rate
  ident::ErrorStats estimation;  // F_hat - F_true after warm-up
  double drift = 0.0;          // mean estimation error over the final 20%
};

/// Closed-loop length hold under seeded random loads; the controller only
/// knows the base load and regulates on the self-sensed length.
inline PerturbationResult run_perturbation(const plant::Scenario& s, const Bundle& b,
                                           Mode mode = Mode::self_sensing) {
  s.validate();
  if (s.kind != plant::ScenarioKind::load_perturbation)
    throw ConfigError("scenario '" + s.name + "' is not a load_perturbation scenario");
  PerturbationResult out;
  out.run = detail::run_loop(s, mode, b, {true, true});
  const auto events = plant::load_schedule(s);
  for (double t : out.run.t) out.load.push_back(plant::load_at(s, events, t));

  const auto& r = out.run;
  out.estimation = window_stats(r.F_hat, r.F_true, r.metric_begin, r.t.size());
  const std::size_t tail = r.t.size() - (r.t.size() - r.metric_begin) / 5;
  out.drift = window_stats(r.F_hat, r.F_true, tail, r.t.size()).mean;
  return out;
}

}  // namespace selfsense::control
