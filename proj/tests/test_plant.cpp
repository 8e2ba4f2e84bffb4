#include <cmath>

#include <gtest/gtest.h>

#include "selfsense/plant.hpp"

using namespace selfsense;
using plant::PlantConfig;

namespace {

PlantConfig quiet(bool hysteresis) {
  PlantConfig c = plant::default_config();
  if (!hysteresis) c.hysteresis.clear();
  c.noise_L = c.noise_F = c.noise_x = 0.0;
  c.valve_tau = 0.0;
  return c;
}

// Signed area enclosed by a closed polyline in the (x, F) plane.
double shoelace(const std::vector<double>& x, const std::vector<double>& F) {
  double a = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t j = (i + 1) % x.size();
    a += x[i] * F[j] - x[j] * F[i];
  }
  return 0.5 * a;
}

// One triangular isometric cycle a -> b -> a after a settling cycle; returns the traced loop.
void triangle_cycle(const PlantConfig& cfg, double P, double a, double b, std::vector<double>& xs,
                    std::vector<double>& Fs, std::vector<double>& Ls) {
  plant::Plant p(cfg, plant::initial_state(cfg, a, cfg.valve_gain * P, true));
  const int n = 400;
  for (int pass = 0; pass < 2; ++pass)
    for (int i = 0; i < 2 * n; ++i) {
      const double x = i < n ? a + (b - a) * (i + 1) / n : b - (b - a) * (i - n + 1) / n;
      const auto o = p.step({P, plant::Constraint::isometric, x, 0.0});
      if (pass == 1) {
        xs.push_back(o.truth.x);
        Fs.push_back(o.truth.F);
        Ls.push_back(o.truth.L_clean);
      }
    }
}

}  // namespace

TEST(PlantStep, SlackState) {
  PlantConfig c = quiet(false);
  plant::Plant p(c, plant::initial_state(c, c.dyn.x0, 0.0));
  const auto o = p.step({0.0, plant::Constraint::isometric, c.dyn.x0, 0.0});
  EXPECT_EQ(o.truth.F, 0.0);
  EXPECT_EQ(o.truth.L_clean, model::eval_coeffs(c.ind, 0.0).lambda5);
}

TEST(PlantStep, LinearModelWithoutHysteresis) {
  PlantConfig c = quiet(false);
  plant::Plant p(c, plant::initial_state(c, 0.12, 0.0));
  for (int i = 0; i < 300; ++i) {
    const double x = 0.13 + 0.03 * std::sin(i * 0.03);  // stays taut
    const double P_cmd = 0.3 + 0.3 * std::cos(i * 0.05);
    const auto o = p.step({P_cmd, plant::Constraint::isometric, x, 0.0});
    EXPECT_EQ(o.truth.P, c.valve_gain * P_cmd);
    EXPECT_NEAR(o.truth.F, model::eval_dynamic_force(c.dyn, x, o.truth.P), 1e-12);
  }
}

TEST(PlantStep, LoopAreaMatchesPlayOperatorFormula) {
  const PlantConfig c = quiet(true);
  const double a = 0.105, b = 0.16, P = 0.3;
  std::vector<double> xs, Fs, Ls;
  triangle_cycle(c, P, a, b, xs, Fs, Ls);
  double expected = 0.0;
  for (const auto& h : c.hysteresis) expected += h.weight * 2.0 * h.width * (b - a - 2.0 * h.width);
  // Play corners fall between grid points; the polygon error is O(h^2).
  EXPECT_NEAR(std::abs(shoelace(xs, Fs)), expected, 1e-4 * expected);
  EXPECT_GT(expected, 0.0);
}

TEST(PlantStep, NoLoopWithoutPlayWeights) {
  PlantConfig c = quiet(true);
  for (auto& h : c.hysteresis) h.weight = 0.0;
  std::vector<double> xs, Fs, Ls;
  triangle_cycle(c, 0.3, 0.105, 0.16, xs, Fs, Ls);
  EXPECT_NEAR(shoelace(xs, Fs), 0.0, 1e-12);
}

TEST(PlantStep, InductanceLiesOnTheMapSurface) {
  const PlantConfig c = quiet(true);
  std::vector<double> xs, Fs, Ls;
  triangle_cycle(c, 0.3, 0.105, 0.16, xs, Fs, Ls);
  const double P = c.valve_gain * 0.3;
  for (std::size_t i = 0; i < Fs.size(); ++i) EXPECT_EQ(Ls[i], model::eval_inductance(c.ind, Fs[i], P));
}

TEST(PlantStep, IsotonicResidual) {
  const PlantConfig c = plant::default_config();
  plant::Plant p(c, plant::initial_state(c, 0.12, 0.2));
  for (int i = 0; i < 200; ++i) {
    const double load = 1.0 + 0.5 * std::sin(i * 0.05);
    const auto o = p.step({0.25, plant::Constraint::isotonic, 0.0, load});
    EXPECT_LE(std::abs(o.truth.F - load), 1e-6);
  }
}

TEST(PlantStep, InfeasibleLoad) {
  const PlantConfig c = plant::default_config();
  plant::Plant p(c, plant::initial_state(c, 0.12, 0.2));
  EXPECT_THROW(p.step({0.25, plant::Constraint::isotonic, 0.0, 50.0}), InfeasibleError);
}

TEST(PlantStep, ValveLag) {
  PlantConfig c = quiet(false);
  c.valve_tau = 0.1;
  plant::Plant p(c, plant::initial_state(c, 0.12, 0.0));
  const auto o = p.step({0.5, plant::Constraint::isometric, 0.12, 0.0});
  EXPECT_NEAR(o.truth.P, c.valve_gain * 0.5 * (1.0 - std::exp(-0.1)), 1e-15);
}

TEST(ReferenceParams, EnvelopeAndShape) {
  const auto ip = plant::reference_inductance_params();
  for (double P = 0.0; P <= 0.65 + 1e-12; P += 0.01) {
    const auto m = model::eval_coeffs(ip, P);
    EXPECT_GT(m.lambda2, 0.0);
    EXPECT_GT(m.lambda4, 0.0);
    EXPECT_LT(m.lambda3, 0.0);
    const double L0 = model::eval_inductance(ip, 0.0, P);
    EXPECT_GE(L0, 4.6);
    EXPECT_LE(L0, 5.4);
  }
}

TEST(Scenarios, CalibrationGridLayout) {
  const auto s = plant::scenarios::calibration_grid();
  ASSERT_EQ(s.pressures.size(), 14u);
  EXPECT_EQ(s.pressures.front(), 0.0);
  EXPECT_NEAR(s.pressures.back(), 0.65, 1e-12);
  for (std::size_t i = 1; i < s.pressures.size(); ++i) EXPECT_NEAR(s.pressures[i] - s.pressures[i - 1], 0.05, 1e-12);
  EXPECT_EQ(s.stretch_ratio, 1.7);
  EXPECT_EQ(s.cycles, 3);

  const auto ds = plant::run_scenario(s, plant::default_config());
  double x_max = 0.0, P_max = 0.0;
  for (const auto& smp : ds.samples) {
    x_max = std::max(x_max, *smp.x);
    P_max = std::max(P_max, smp.P);
  }
  EXPECT_NEAR(x_max, 0.17, 1e-12);
  EXPECT_NEAR(P_max, 0.65, 1e-3);  // valve lag settles within the first hold
  EXPECT_NO_THROW(ds.validate());
}

TEST(Scenarios, IsometricSweepLayout) {
  const auto s = plant::scenarios::isometric_sweep();
  ASSERT_EQ(s.length_ratios.size(), 15u);
  EXPECT_EQ(s.length_ratios.front(), 1.0);
  EXPECT_NEAR(s.length_ratios.back(), 1.7, 1e-12);
  EXPECT_EQ(s.pressure_step, 0.02);
  EXPECT_EQ(s.pressure_peak, 0.66);
  const auto ds = plant::run_scenario(s, plant::default_config());
  EXPECT_FALSE(ds.empty());
}

TEST(Scenarios, SeededDeterminism) {
  const auto s = plant::scenarios::load_perturbation();
  auto cfg = plant::default_config();
  const auto a = plant::run_scenario(s, cfg);
  const auto b = plant::run_scenario(s, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a.samples[i].L, b.samples[i].L);
    ASSERT_EQ(*a.samples[i].F, *b.samples[i].F);
  }
  cfg.seed = 2;
  const auto c = plant::run_scenario(s, cfg);
  EXPECT_NE(a.samples[10].L, c.samples[10].L);
}

TEST(Scenarios, LoadScheduleLimits) {
  auto s = plant::scenarios::load_perturbation();
  const auto ev = plant::load_schedule(s);
  ASSERT_EQ(ev.size(), static_cast<std::size_t>(s.load_events));
  double hanging = 0.0, prev_t = 0.0;
  int count = 0;
  for (const auto& e : ev) {
    EXPECT_GT(e.t, prev_t);
    EXPECT_GT(e.t, s.warmup_s);
    EXPECT_LT(e.t, s.duration_s);
    prev_t = e.t;
    hanging += e.delta;
    count += e.delta > 0 ? 1 : -1;
    EXPECT_GE(hanging, -1e-12);
    EXPECT_LE(count, 2);
    EXPECT_GE(count, 0);
  }
  // Raised-cosine transitions: halfway through, half the weight is on.
  const double mid = ev.front().t + 0.5 * s.transition_s;
  EXPECT_NEAR(plant::load_at(s, {ev.front()}, mid), s.load + 0.5 * ev.front().delta, 1e-12);
  EXPECT_EQ(plant::load_at(s, ev, 0.0), s.load);
}

TEST(Scenarios, TrackingKindsNeedController) {
  EXPECT_THROW(plant::run_scenario(plant::scenarios::force_tracking(plant::Waveform::sine, 0.2),
                                   plant::default_config()),
               ConfigError);
}

TEST(Scenarios, Validation) {
  auto s = plant::scenarios::calibration_grid();
  s.pressures.clear();
  EXPECT_THROW(s.validate(), ConfigError);
  s = plant::scenarios::force_tracking(plant::Waveform::sine, 0.2);
  s.frequency_hz = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_FALSE(plant::parse_kind("warp").has_value());
}
