#pragma once

// Parameter identification: ordinary least squares for the force model and a
// multi-start bounded trust-region fit for the inductance map.

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "selfsense/errors.hpp"
#include "selfsense/model.hpp"
#include "selfsense/trust_region.hpp"

namespace selfsense::ident {

struct Sample {
  double t = 0.0;  // s
  double P = 0.0;  // MPa
  double L = 0.0;  // uH
  std::optional<double> F;  // N
  std::optional<double> x;  // m
};

/// Ordered samples plus free-form provenance tags. `extra` holds additional
/// named per-sample channels (e.g. noise-free truth from the simulator).
struct Dataset {
  std::vector<Sample> samples;
  std::map<std::string, std::string> meta;
  std::map<std::string, std::vector<double>> extra;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  bool has_force() const {
    return !samples.empty() &&
           std::all_of(samples.begin(), samples.end(), [](const Sample& s) { return s.F.has_value(); });
  }
  bool has_length() const {
    return !samples.empty() &&
           std::all_of(samples.begin(), samples.end(), [](const Sample& s) { return s.x.has_value(); });
  }

  const std::vector<double>* channel(const std::string& name) const {
    auto it = extra.find(name);
    return it == extra.end() ? nullptr : &it->second;
  }

  void validate() const {
    if (samples.empty()) throw DataError("dataset is empty");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const Sample& s = samples[i];
      if (!std::isfinite(s.t) || !std::isfinite(s.P) || !std::isfinite(s.L))
        throw DataError("non-finite value in sample " + std::to_string(i));
      if (s.P < 0.0) throw DataError("negative pressure in sample " + std::to_string(i));
      if (i > 0 && !(s.t > samples[i - 1].t))
        throw DataError("timestamps not strictly increasing at sample " + std::to_string(i));
    }
    for (const auto& [name, values] : extra)
      if (values.size() != samples.size())
        throw DataError("channel '" + name + "' length differs from sample count");
  }
};

template <class Params>
struct FitReport {
  Params params{};
  double rmse = 0.0;
  double r2 = 0.0;
  int iterations = 0;
  bool converged = false;
  double cost = 0.0;     // 0.5 * sum of squared residuals
  int best_start = 0;    // multi-start index that produced `params`
  std::string status;
  std::vector<opt::IterationRecord> log;
};

// ---------------------------------------------------------------------------
// Goodness of fit

struct ErrorStats {
  double rmse = 0.0;
  double mae = 0.0;
  double max_abs = 0.0;
  double mean = 0.0;  // signed bias, predicted - observed
};

inline ErrorStats error_stats(const std::vector<double>& predicted,
                              const std::vector<double>& observed) {
  if (predicted.size() != observed.size() || predicted.empty())
    throw DataError("error statistics need equal, non-empty series");
  ErrorStats s;
  double sq = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double e = predicted[i] - observed[i];
    sq += e * e;
    s.mae += std::abs(e);
    s.mean += e;
    s.max_abs = std::max(s.max_abs, std::abs(e));
  }
  const double n = static_cast<double>(predicted.size());
  s.rmse = std::sqrt(sq / n);
  s.mae /= n;
  s.mean /= n;
  return s;
}

struct Goodness {
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  double nrmse = 0.0;  // percent of the observed range
};

inline Goodness goodness(const std::vector<double>& predicted,
                         const std::vector<double>& observed) {
  if (predicted.size() != observed.size() || observed.size() < 2)
    throw DataError("goodness needs two equal-length series of at least 2 points");
  const auto [lo, hi] = std::minmax_element(observed.begin(), observed.end());
  if (!(*hi > *lo)) throw DataError("observed series is constant; r2 and nrmse undefined");

  const ErrorStats e = error_stats(predicted, observed);
  double mean = 0.0;
  for (double v : observed) mean += v;
  mean /= static_cast<double>(observed.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    ss_tot += (observed[i] - mean) * (observed[i] - mean);
    ss_res += (predicted[i] - observed[i]) * (predicted[i] - observed[i]);
  }
  Goodness g;
  g.rmse = e.rmse;
  g.mae = e.mae;
  g.r2 = 1.0 - ss_res / ss_tot;
  g.nrmse = 100.0 * e.rmse / (*hi - *lo);
  return g;
}

// ---------------------------------------------------------------------------
// Force model: F = k x + c P + b, with b = -k x0

inline FitReport<model::DynamicParams> fit_dynamic(const Dataset& data) {
  if (data.size() < 3) throw DataError("fit_dynamic needs at least 3 samples");
  if (!data.has_force() || !data.has_length())
    throw MissingColumnError(!data.has_force() ? "F" : "x");

  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Sample& s = data.samples[static_cast<std::size_t>(i)];
    A(i, 0) = *s.x;
    A(i, 1) = s.P;
    A(i, 2) = 1.0;
    b[i] = *s.F;
  }
  // Column scaling keeps the rank test meaningful for m-scale lengths.
  Eigen::Vector3d scale;
  for (int j = 0; j < 3; ++j) {
    scale[j] = A.col(j).cwiseAbs().maxCoeff();
    if (scale[j] == 0.0) throw RankDeficientError("design column is identically zero");
    A.col(j) /= scale[j];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3)
    throw RankDeficientError("force-model design matrix is rank deficient (need distinct x and P)");
  const Eigen::Vector3d beta = qr.solve(b).cwiseQuotient(scale);

  FitReport<model::DynamicParams> rep;
  rep.params.k = beta[0];
  rep.params.c = beta[1];
  if (!(beta[0] > 0.0)) throw DataError("fitted stiffness is not positive");
  rep.params.x0 = -beta[2] / beta[0];

  std::vector<double> pred(data.size()), obs(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    pred[i] = model::eval_dynamic_force(rep.params, *data.samples[i].x, data.samples[i].P);
    obs[i] = *data.samples[i].F;
  }
  const ErrorStats e = error_stats(pred, obs);
  rep.rmse = e.rmse;
  rep.cost = 0.5 * e.rmse * e.rmse * static_cast<double>(data.size());
  const auto [lo, hi] = std::minmax_element(obs.begin(), obs.end());
  rep.r2 = *hi > *lo ? goodness(pred, obs).r2 : 1.0;
  rep.iterations = 1;
  rep.converged = true;
  rep.status = "closed form";
  return rep;
}

// ---------------------------------------------------------------------------
// Inductance map

struct CoefficientBounds {
  std::array<double, model::kNumInductanceParams> lower{};
  std::array<double, model::kNumInductanceParams> upper{};

  /// |p_i| <= 1e3; the l2 and l4 intercepts stay >= 0.05 so F = 0 is evaluable.
  static CoefficientBounds defaults() {
    CoefficientBounds b;
    b.lower.fill(-1e3);
    b.upper.fill(1e3);
    b.lower[3] = 0.05;
    b.lower[7] = 0.05;
    return b;
  }

  bool contains(const model::InductanceParams& ip) const {
    for (std::size_t i = 0; i < ip.p.size(); ++i)
      if (ip.p[i] < lower[i] || ip.p[i] > upper[i]) return false;
    return true;
  }

  void validate() const {
    for (std::size_t i = 0; i < lower.size(); ++i)
      if (!(lower[i] < upper[i])) throw ConfigError("coefficient bounds need lower < upper");
  }
};

struct InductanceFitOptions {
  int starts = 8;
  double perturbation = 0.20;  // relative, uniform, per coefficient
  unsigned long long seed = 1;
  bool parallel = true;
  opt::TrustRegionOptions solver{};
  std::size_t min_samples = 20;
};

namespace detail {

struct InductanceProblem {
  std::vector<double> F, P, L;

  static model::InductanceParams unpack(const opt::Vec& x) {
    model::InductanceParams ip;
    for (std::size_t i = 0; i < ip.p.size(); ++i) ip.p[i] = x[static_cast<Eigen::Index>(i)];
    return ip;
  }

  bool residuals(const opt::Vec& x, opt::Vec& r) const {
    const auto ip = unpack(x);
    r.resize(static_cast<Eigen::Index>(F.size()));
    for (std::size_t i = 0; i < F.size(); ++i) {
      const auto m = model::eval_coeffs_unchecked(ip, P[i]);
      if (!model::coeffs_valid(m)) return false;
      r[static_cast<Eigen::Index>(i)] = model::eval_inductance(m, F[i]) - L[i];
    }
    return r.allFinite();
  }

  void jacobian(const opt::Vec& x, const opt::Vec&, opt::Mat& J) const {
    const auto ip = unpack(x);
    J.resize(static_cast<Eigen::Index>(F.size()), static_cast<Eigen::Index>(ip.p.size()));
    for (std::size_t i = 0; i < F.size(); ++i) {
      const auto m = model::eval_coeffs_unchecked(ip, P[i]);
      const auto g = model::d_inductance_dp(m, F[i], P[i]);
      for (std::size_t j = 0; j < g.size(); ++j)
        J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g[j];
    }
  }
};

}  // namespace detail

/// Start points for the multi-start search: the initial guess first, then
/// seeded uniform relative perturbations clipped into the box.
inline std::vector<model::InductanceParams> multistart_points(
    const model::InductanceParams& init, const CoefficientBounds& bounds,
    const InductanceFitOptions& opt) {
  std::vector<model::InductanceParams> pts{init};
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(-opt.perturbation, opt.perturbation);
  for (int s = 1; s < opt.starts; ++s) {
    model::InductanceParams q = init;
    for (std::size_t i = 0; i < q.p.size(); ++i)
      q.p[i] = std::clamp(q.p[i] * (1.0 + u(rng)), bounds.lower[i], bounds.upper[i]);
    pts.push_back(q);
  }
  return pts;
}

inline FitReport<model::InductanceParams> fit_inductance(const Dataset& data,
                                                          const model::InductanceParams& init,
                                                          const CoefficientBounds& bounds,
                                                          const InductanceFitOptions& opt = {}) {
  if (!data.has_force()) throw MissingColumnError("F");
  if (data.size() < opt.min_samples)
    throw DataError("fit_inductance needs at least " + std::to_string(opt.min_samples) +
                    " samples");
  bounds.validate();
  if (!bounds.contains(init)) throw ConfigError("initial coefficients violate the bounds");

  detail::InductanceProblem prob;
  double pmin = data.samples.front().P, pmax = pmin;
  for (const Sample& s : data.samples) {
    prob.F.push_back(std::max(0.0, *s.F));  // slightly negative load-cell readings mean no load
    prob.P.push_back(s.P);
    prob.L.push_back(s.L);
    pmin = std::min(pmin, s.P);
    pmax = std::max(pmax, s.P);
  }
  if (!(pmax - pmin > 1e-9)) throw DataError("fit_inductance needs at least two pressure levels");

  const auto n = static_cast<Eigen::Index>(model::kNumInductanceParams);
  opt::Vec lb(n), ub(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    lb[i] = bounds.lower[static_cast<std::size_t>(i)];
    ub[i] = bounds.upper[static_cast<std::size_t>(i)];
  }

  const auto starts = multistart_points(init, bounds, opt);
  auto run = [&](const model::InductanceParams& s) {
    opt::Vec x0(n);
    for (Eigen::Index i = 0; i < n; ++i) x0[i] = s.p[static_cast<std::size_t>(i)];
    return opt::solve_bounded_least_squares(prob, x0, lb, ub, opt.solver);
  };

  std::vector<opt::TrustRegionResult> results;
  if (opt.parallel && starts.size() > 1) {
    std::vector<std::future<opt::TrustRegionResult>> futures;
    for (const auto& s : starts) futures.push_back(std::async(std::launch::async, run, s));
    for (auto& f : futures) results.push_back(f.get());
  } else {
    for (const auto& s : starts) results.push_back(run(s));
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i)
    if (results[i].cost < results[best].cost) best = i;  // strict: lowest index wins ties
  const auto& r = results[best];
  if (!std::isfinite(r.cost)) throw DataError("no start point yields a valid inductance model");

  FitReport<model::InductanceParams> rep;
  rep.params = detail::InductanceProblem::unpack(r.x);
  rep.cost = r.cost;
  rep.iterations = r.iterations;
  rep.converged = r.converged;
  rep.status = r.status;
  rep.best_start = static_cast<int>(best);
  rep.log = r.log;

  std::vector<double> pred(prob.F.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    pred[i] = model::eval_inductance(rep.params, prob.F[i], prob.P[i]);
  const auto [lo, hi] = std::minmax_element(prob.L.begin(), prob.L.end());
  if (*hi > *lo) {
    const Goodness g = goodness(pred, prob.L);
    rep.rmse = g.rmse;
    rep.r2 = g.r2;
  } else {
    rep.rmse = error_stats(pred, prob.L).rmse;
    rep.r2 = rep.rmse == 0.0 ? 1.0 : 0.0;
  }
  return rep;
}

}  // namespace selfsense::ident
