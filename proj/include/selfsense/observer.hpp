#pragma once

// Hybrid EKF / optimisation force observer.
//
// The state is [F, dF/dt] with a constant-velocity prediction. The inductance
// map is not inverted directly: each sample a pseudo-measurement F* minimises
//
//   J(F) = w_fit (L(F, P) - L_meas)^2 + w_dyn (F - F_prior)^2
//        + w_reg (1 - 1 / (1 + gamma (F - F_prior)^2))
//
// over [F_min, F_max], and F* is fed to a scalar Kalman update. The
// continuity terms pick the branch of the non-monotonic map nearest to the
// predicted trajectory.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "selfsense/dsp.hpp"
#include "selfsense/errors.hpp"
#include "selfsense/model.hpp"

namespace selfsense::observer {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;

struct ObserverState {
  double F_hat = 0.0;     // N
  double Fdot_hat = 0.0;  // N/s
  Mat2 cov = Mat2::Identity();

  Vec2 mean() const { return {F_hat, Fdot_hat}; }

  bool covariance_valid(double sym_tol = 1e-12) const {
    if (!cov.allFinite()) return false;
    if (std::abs(cov(0, 1) - cov(1, 0)) > sym_tol) return false;
    const Eigen::SelfAdjointEigenSolver<Mat2> es(cov);
    return es.eigenvalues().minCoeff() >= -sym_tol;
  }
};

struct CostWeights {
  double w_fit = 1.0;
  double w_dyn = 0.0144;
  double w_reg = 0.00144;
  double gamma = 1.0;  // 1/N^2

  void validate() const {
    if (w_fit < 0.0 || w_dyn < 0.0 || w_reg < 0.0)
      throw ConfigError("cost weights must be non-negative");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  }

  /// w_dyn prices a deviation of 5% of the force span like an inductance
  /// residual of three noise standard deviations; w_reg = 0.1 w_dyn and
  /// gamma = 25 / span^2.
  static CostWeights scaled(double force_span, double noise_L) {
    CostWeights w;
    w.w_fit = 1.0;
    const double dev = 0.05 * force_span;
    w.w_dyn = w.w_fit * (3.0 * noise_L) * (3.0 * noise_L) / (dev * dev);
    w.w_reg = 0.1 * w.w_dyn;
    w.gamma = 25.0 / (force_span * force_span);
    return w;
  }
};

struct ObserverConfig {
  double dt = 0.01;  // s, sensor period
  Mat2 Q = Mat2::Zero();
  double R = 1e-3;  // N^2
  model::OperatingEnvelope envelope{};
  CostWeights weights{};
  int grid_points = 101;
  double refine_tol = 1e-5;  // N
  Mat2 initial_cov = (Mat2() << 0.25, 0.0, 0.0, 1.0).finished();

  // Reduced-observability guard near the peak of the map.
  double median_gradient = 0.0;  // uH/N over the envelope; 0 disables the guard
  double guard_fraction = 1e-4;
  double guard_inflation = 10.0;

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("observer dt must be positive");
    if (!(R > 0.0)) throw ConfigError("observer R must be positive");
    if (grid_points < 16) throw ConfigError("observer grid_points must be >= 16");
    if (!(refine_tol > 0.0)) throw ConfigError("observer refine_tol must be positive");
    if (std::abs(Q(0, 1) - Q(1, 0)) > 1e-15) throw ConfigError("observer Q must be symmetric");
    const Eigen::SelfAdjointEigenSolver<Mat2> es(Q);
    if (es.eigenvalues().minCoeff() < -1e-15) throw ConfigError("observer Q must be PSD");
    envelope.validate();
    weights.validate();
  }
};

/// Median |dL/dF| on a grid covering the envelope.
inline double median_gradient(const model::InductanceParams& params,
                              const model::OperatingEnvelope& env, int nF = 50, int nP = 14) {
  std::vector<double> g;
  for (int j = 0; j < nP; ++j) {
    const double P = env.P_min + (env.P_max - env.P_min) * j / (nP - 1);
    const auto m = model::eval_coeffs_unchecked(params, P);
    if (!model::coeffs_valid(m)) continue;
    for (int i = 1; i <= nF; ++i) {
      const double F = env.F_min + env.force_span() * i / nF;
      if (F > 0.0) g.push_back(std::abs(model::d_inductance_dF(m, F)));
    }
  }
  if (g.empty()) return 0.0;
  std::nth_element(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(g.size() / 2), g.end());
  return g[g.size() / 2];
}

/// Noise-scaled defaults: Q = diag((sF dt)^2, sFdot^2 dt) with sF = 0.05 N/s and
/// sFdot = 0.05 N/s^2; R is the square of the noise-equivalent force
/// noise_L / median|dL/dF|.
inline ObserverConfig default_config(const model::InductanceParams& params,
                                     const model::OperatingEnvelope& env, double dt,
                                     double noise_L = 0.01) {
  ObserverConfig cfg;
  cfg.dt = dt;
  cfg.envelope = env;
  // Small rate noise: momentum has to carry the estimate across the flat top of
  // the map, where the pseudo-measurement pulls toward the nearer branch.
  const double sF = 0.05, sFdot = 0.05;
  cfg.Q << (sF * dt) * (sF * dt), 0.0, 0.0, sFdot * sFdot * dt;
  cfg.median_gradient = median_gradient(params, env);
  const double fe = cfg.median_gradient > 0.0 ? noise_L / cfg.median_gradient : 0.05;
  cfg.R = fe * fe;
  cfg.weights = CostWeights::scaled(env.force_span(), noise_L);
  return cfg;
}

// ---------------------------------------------------------------------------

inline ObserverState reset(double F0, const ObserverConfig& cfg) {
  if (!cfg.envelope.contains_force(F0)) throw EnvelopeError("initial force outside [F_min, F_max]");
  ObserverState s;
  s.F_hat = F0;
  s.Fdot_hat = 0.0;
  s.cov = cfg.initial_cov;
  return s;
}

inline ObserverState predict(const ObserverState& s, const ObserverConfig& cfg) {
  Mat2 A;
  A << 1.0, cfg.dt, 0.0, 1.0;
  ObserverState out;
  const Vec2 m = A * s.mean();
  out.F_hat = m[0];
  out.Fdot_hat = m[1];
  out.cov = A * s.cov * A.transpose() + cfg.Q;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

/// Scalar Kalman update with H = [1 0], Joseph-form covariance.
inline ObserverState update(const ObserverState& prior, double F_star, double R) {
  const Vec2 PHt = prior.cov.col(0);
  const double S = prior.cov(0, 0) + R;
  const Vec2 K = PHt / S;
  const double innovation = F_star - prior.F_hat;

  ObserverState out;
  const Vec2 m = prior.mean() + K * innovation;
  out.F_hat = m[0];
  out.Fdot_hat = m[1];
  Mat2 IKH = Mat2::Identity();
  IKH(0, 0) -= K[0];
  IKH(1, 0) -= K[1];
  out.cov = IKH * prior.cov * IKH.transpose() + R * K * K.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

inline ObserverState update(const ObserverState& prior, double F_star, const ObserverConfig& cfg) {
  return update(prior, F_star, cfg.R);
}

// ---------------------------------------------------------------------------
// Inner minimisation

struct CompositeCost {
  model::ModelCoeffs coeffs;
  double L_meas = 0.0;
  double prior_F = 0.0;
  CostWeights w;

  double operator()(double F) const {
    const double r = model::eval_inductance(coeffs, F) - L_meas;
    const double d = F - prior_F;
    return w.w_fit * r * r + w.w_dyn * d * d + w.w_reg * (1.0 - 1.0 / (1.0 + w.gamma * d * d));
  }
};

/// Golden-section search for a minimum of f on [a, b]; result within tol.
template <class Fn>
double golden_section(const Fn& f, double a, double b, double tol) {
  constexpr double invphi = 0.6180339887498949;  // 1/phi
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > 2.0 * tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

struct PseudoMeasurement {
  double F = 0.0;
  double cost = 0.0;
};

/// Coarse scan of the whole interval, then golden-section refinement of every
/// discrete local minimum of the scan; the best refined point wins.
template <class Fn>
PseudoMeasurement grid_then_golden(const Fn& cost, double lo, double hi, int grid_points,
                                   double tol) {
  const int n = grid_points;
  const double h = (hi - lo) / (n - 1);
  std::vector<double> J(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) J[static_cast<std::size_t>(i)] = cost(i == n - 1 ? hi : lo + i * h);

  PseudoMeasurement best{lo, std::numeric_limits<double>::infinity()};
  for (int i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const bool left_ok = i == 0 || J[u] <= J[u - 1];
    const bool right_ok = i == n - 1 || J[u] <= J[u + 1];
    if (!(left_ok && right_ok)) continue;
    const double a = std::max(lo, lo + (i - 1) * h);
    const double b = std::min(hi, lo + (i + 1) * h);
    const double F = std::clamp(golden_section(cost, a, b, tol), lo, hi);
    double JF = cost(F);
    double Fbest = F;
    // An edge minimum is only approached from inside by the search.
    if ((i == 0 || i == n - 1) && J[u] < JF) {
      Fbest = i == 0 ? lo : hi;
      JF = J[u];
    }
    if (JF < best.cost) best = {Fbest, JF};
  }
  return best;
}

inline PseudoMeasurement solve_pseudo_measurement_detail(double L_meas, double P, double prior_F,
                                                         const model::InductanceParams& params,
                                                         const ObserverConfig& cfg) {
  if (!std::isfinite(prior_F)) throw DomainError("prior force must be finite");
  const CompositeCost cost{model::eval_coeffs(params, P, cfg.envelope), L_meas, prior_F,
                           cfg.weights};
  return grid_then_golden(cost, cfg.envelope.F_min, cfg.envelope.F_max, cfg.grid_points,
                          cfg.refine_tol);
}

inline double solve_pseudo_measurement(double L_meas, double P, double prior_F,
                                       const model::InductanceParams& params,
                                       const ObserverConfig& cfg) {
  return solve_pseudo_measurement_detail(L_meas, P, prior_F, params, cfg).F;
}

/// Memoryless baseline: the global least-residual preimage of L_meas, with
/// no knowledge of the previous estimate.
inline double invert_memoryless(double L_meas, double P, const model::InductanceParams& params,
                                const model::OperatingEnvelope& env, int grid_points = 2001,
                                double tol = 1e-6) {
  const auto coeffs = model::eval_coeffs(params, P, env);
  auto resid = [&](double F) {
    const double r = model::eval_inductance(coeffs, F) - L_meas;
    return r * r;
  };
  return grid_then_golden(resid, env.F_min, env.F_max, grid_points, tol).F;
}

// ---------------------------------------------------------------------------

struct StepResult {
  ObserverState state;
  double F_hat = 0.0;   // N
  double x_hat = 0.0;   // m
  double F_star = 0.0;  // pseudo-measurement, N
  double L_filtered = 0.0;
  double R_used = 0.0;
};

inline StepResult estimate_step(const ObserverState& state, double L_raw, double P,
                                const model::InductanceParams& params,
                                const model::DynamicParams& dyn, const ObserverConfig& cfg,
                                dsp::FilterState& filt) {
  StepResult out;
  out.L_filtered = filt.step(L_raw);
  const ObserverState prior = predict(state, cfg);
  const PseudoMeasurement pm =
      solve_pseudo_measurement_detail(out.L_filtered, P, prior.F_hat, params, cfg);
  out.F_star = pm.F;

  out.R_used = cfg.R;
  if (cfg.median_gradient > 0.0 && pm.F > 0.0) {
    const double g = std::abs(model::d_inductance_dF(params, pm.F, P));
    if (g < cfg.guard_fraction * cfg.median_gradient) out.R_used *= cfg.guard_inflation;
  }
  out.state = update(prior, pm.F, out.R_used);
  out.F_hat = out.state.F_hat;
  out.x_hat = model::invert_dynamic_length(dyn, out.F_hat, P);
  return out;
}

/// One actuator's observer: filter, state and models, stepped in sample order.
class Observer {
 public:
  Observer(model::InductanceParams params, model::DynamicParams dyn, ObserverConfig cfg,
           dsp::FilterSpec filter_spec)
      : params_(params), dyn_(dyn), cfg_(std::move(cfg)), filter_(dsp::design(filter_spec)) {
    cfg_.validate();
    dyn_.validate();
  }

  /// Starts from a known force; the filter is primed with the first reading.
  void reset(double F0, double L_first) {
    state_ = observer::reset(F0, cfg_);
    filter_.reset();
    filter_.prime(L_first);
    started_ = true;
  }

  StepResult step(double L_raw, double P) {
    if (!started_) reset(cfg_.envelope.F_min, L_raw);
    StepResult r = estimate_step(state_, L_raw, P, params_, dyn_, cfg_, filter_);
    state_ = r.state;
    return r;
  }

  const ObserverState& state() const { return state_; }
  const ObserverConfig& config() const { return cfg_; }

 private:
  model::InductanceParams params_;
  model::DynamicParams dyn_;
  ObserverConfig cfg_;
  dsp::FilterState filter_;
  ObserverState state_{};
  bool started_ = false;
};

}  // namespace selfsense::observer
