#pragma once

// Bound-constrained nonlinear least squares, trust-region reflective.
//
// Minimises 0.5 |r(x)|^2 subject to lb <= x <= ub. Each iteration scales the
// problem with the Coleman-Li vector (distance to the bound the gradient
// points at), solves the scaled trust-region subproblem through an SVD and a
// Levenberg-Marquardt parameter search, and then chooses between the step
// truncated at the first bound, its reflection off that bound, and a
// Cauchy-type anti-gradient step. Iterates stay strictly inside the box.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace selfsense::opt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// A residual function plus its Jacobian. `residuals` returns false when x is
/// outside the model's own domain; the solver then shrinks the trust region.
template <class P>
concept LeastSquaresProblem = requires(P& p, const Vec& x, Vec& r, Mat& J) {
  { p.residuals(x, r) } -> std::convertible_to<bool>;
  { p.jacobian(x, r, J) };
};

struct TrustRegionOptions {
  double xtol = 1e-10;
  double ftol = 1e-12;
  double gtol = 1e-12;
  int max_iterations = 500;
};

struct IterationRecord {
  int iteration = 0;
  double cost = 0.0;       // after the iteration
  double step_norm = 0.0;  // zero when the step was rejected
  double radius = 0.0;
  double ratio = 0.0;      // actual / predicted reduction
  bool accepted = false;
};

struct TrustRegionResult {
  Vec x;
  double cost = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string status;
  std::vector<IterationRecord> log;
};

namespace trf {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool in_bounds(const Vec& x, const Vec& lb, const Vec& ub) {
  return ((x.array() >= lb.array()) && (x.array() <= ub.array())).all();
}

// Largest t with x + t s inside the box, and which components hit first (-1/+1).
inline double step_size_to_bound(const Vec& x, const Vec& s, const Vec& lb, const Vec& ub,
                                 Eigen::VectorXi* hits = nullptr) {
  const auto n = x.size();
  Vec steps = Vec::Constant(n, kInf);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (s[i] != 0.0) steps[i] = std::max((lb[i] - x[i]) / s[i], (ub[i] - x[i]) / s[i]);
  }
  const double min_step = steps.minCoeff();
  if (hits) {
    hits->setZero(n);
    for (Eigen::Index i = 0; i < n; ++i)
      if (steps[i] == min_step && s[i] != 0.0) (*hits)[i] = s[i] > 0.0 ? 1 : -1;
  }
  return min_step;
}

// Roots t1 <= t2 of |x + t s| = radius.
inline std::pair<double, double> intersect_trust_region(const Vec& x, const Vec& s,
                                                         double radius) {
  const double a = s.squaredNorm();
  const double b = x.dot(s);
  const double c = x.squaredNorm() - radius * radius;
  const double d = std::sqrt(std::max(0.0, b * b - a * c));
  const double q = -(b + std::copysign(d, b));
  double t1 = q / a;
  double t2 = c / q;
  if (t1 > t2) std::swap(t1, t2);
  return {t1, t2};
}

inline Vec make_strictly_feasible(const Vec& x, const Vec& lb, const Vec& ub,
                                  double rstep) {
  Vec out = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    int active = 0;
    if (rstep == 0.0) {
      if (x[i] <= lb[i]) active = -1;
      else if (x[i] >= ub[i]) active = 1;
    } else {
      const double lower_dist = x[i] - lb[i];
      const double upper_dist = ub[i] - x[i];
      const double lower_thr = rstep * std::max(1.0, std::abs(lb[i]));
      const double upper_thr = rstep * std::max(1.0, std::abs(ub[i]));
      if (std::isfinite(lb[i]) && lower_dist <= std::min(upper_dist, lower_thr)) active = -1;
      else if (std::isfinite(ub[i]) && upper_dist <= std::min(lower_dist, upper_thr)) active = 1;
    }
    if (active == -1) {
      out[i] = rstep == 0.0 ? std::nextafter(lb[i], ub[i])
                            : lb[i] + rstep * std::max(1.0, std::abs(lb[i]));
    } else if (active == 1) {
      out[i] = rstep == 0.0 ? std::nextafter(ub[i], lb[i])
                            : ub[i] - rstep * std::max(1.0, std::abs(ub[i]));
    }
    if (out[i] < lb[i] || out[i] > ub[i]) out[i] = 0.5 * (lb[i] + ub[i]);
  }
  return out;
}

// Coleman-Li scaling vector v and its derivative sign dv.
inline void scaling_vector(const Vec& x, const Vec& g, const Vec& lb, const Vec& ub, Vec& v,
                           Vec& dv) {
  const auto n = x.size();
  v.setOnes(n);
  dv.setZero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (g[i] < 0.0 && std::isfinite(ub[i])) {
      v[i] = ub[i] - x[i];
      dv[i] = -1.0;
    } else if (g[i] > 0.0 && std::isfinite(lb[i])) {
      v[i] = x[i] - lb[i];
      dv[i] = 1.0;
    }
  }
}

// 0.5 s'(J'J + diag)s + g's
inline double evaluate_quadratic(const Mat& J, const Vec& g, const Vec& s, const Vec& diag) {
  const Vec Js = J * s;
  return 0.5 * (Js.squaredNorm() + s.dot(diag.cwiseProduct(s))) + g.dot(s);
}

struct Quadratic1d {
  double a = 0.0, b = 0.0, c = 0.0;
};

// Coefficients of t -> q(s0 + t s).
inline Quadratic1d build_quadratic_1d(const Mat& J, const Vec& g, const Vec& s, const Vec& diag,
                                      const Vec* s0 = nullptr) {
  const Vec v = J * s;
  Quadratic1d q;
  q.a = 0.5 * (v.squaredNorm() + s.dot(diag.cwiseProduct(s)));
  q.b = g.dot(s);
  if (s0) {
    const Vec u = J * (*s0);
    q.b += u.dot(v) + s0->dot(diag.cwiseProduct(s));
    q.c = 0.5 * (u.squaredNorm() + s0->dot(diag.cwiseProduct(*s0))) + g.dot(*s0);
  }
  return q;
}

inline std::pair<double, double> minimize_quadratic_1d(const Quadratic1d& q, double lo,
                                                       double hi) {
  double ts[3] = {lo, hi, lo};
  int count = 2;
  if (q.a != 0.0) {
    const double extremum = -0.5 * q.b / q.a;
    if (lo < extremum && extremum < hi) ts[count++] = extremum;
  }
  double best_t = lo;
  double best_y = kInf;
  for (int i = 0; i < count; ++i) {
    const double y = ts[i] * (q.a * ts[i] + q.b) + q.c;
    if (y < best_y) {
      best_y = y;
      best_t = ts[i];
    }
  }
  return {best_t, best_y};
}

// Levenberg-Marquardt parameter search for min |J p + f| s.t. |p| <= radius,
// given J = U diag(s) V'. Returns the step and the final damping alpha.
inline Vec solve_subproblem(const Vec& uf, const Vec& s, const Mat& V, double radius,
                            double& alpha, Eigen::Index m) {
  const auto n = s.size();
  const Vec suf = s.cwiseProduct(uf);
  bool full_rank = false;
  if (m >= n) full_rank = s[n - 1] > kEps * static_cast<double>(m) * s[0];

  auto phi_and_derivative = [&](double a, double& phi, double& dphi) {
    const Vec denom = s.array().square() + a;
    const double p_norm = (suf.array() / denom.array()).matrix().norm();
    phi = p_norm - radius;
    dphi = -(suf.array().square() / denom.array().cube()).sum() / p_norm;
  };

  if (full_rank) {
    Vec p = -V * (uf.array() / s.array()).matrix();
    if (p.norm() <= radius) {
      alpha = 0.0;
      return p;
    }
  }
  double alpha_upper = suf.norm() / radius;
  double alpha_lower = 0.0;
  if (full_rank) {
    double phi, dphi;
    phi_and_derivative(0.0, phi, dphi);
    alpha_lower = -phi / dphi;
  }
  if (!full_rank && alpha == 0.0)
    alpha = std::max(0.001 * alpha_upper, std::sqrt(alpha_lower * alpha_upper));

  for (int it = 0; it < 10; ++it) {
    if (alpha < alpha_lower || alpha > alpha_upper)
      alpha = std::max(0.001 * alpha_upper, std::sqrt(alpha_lower * alpha_upper));
    double phi, dphi;
    phi_and_derivative(alpha, phi, dphi);
    if (phi < 0.0) alpha_upper = alpha;
    const double ratio = phi / dphi;
    alpha_lower = std::max(alpha_lower, alpha - ratio);
    alpha -= (phi + radius) * ratio / radius;
    if (std::abs(phi) < 0.01 * radius) break;
  }
  Vec p = -V * (suf.array() / (s.array().square() + alpha)).matrix();
  p *= radius / p.norm();
  return p;
}

struct SelectedStep {
  Vec step, step_h;
  double predicted_reduction = 0.0;
};

inline SelectedStep select_step(const Vec& x, const Mat& J_h, const Vec& diag_h, const Vec& g_h,
                                Vec p, Vec p_h, const Vec& d, double radius, const Vec& lb,
                                const Vec& ub, double theta) {
  if (in_bounds(x + p, lb, ub)) {
    const double pv = evaluate_quadratic(J_h, g_h, p_h, diag_h);
    return {p, p_h, -pv};
  }

  Eigen::VectorXi hits;
  const double p_stride = step_size_to_bound(x, p, lb, ub, &hits);

  // Reflected direction.
  Vec r_h = p_h;
  for (Eigen::Index i = 0; i < r_h.size(); ++i)
    if (hits[i] != 0) r_h[i] = -r_h[i];
  Vec r = d.cwiseProduct(r_h);

  p *= p_stride;
  p_h *= p_stride;
  const Vec x_on_bound = x + p;

  const double to_tr = intersect_trust_region(p_h, r_h, radius).second;
  const double to_bound = step_size_to_bound(x_on_bound, r, lb, ub);
  double r_stride = std::min(to_bound, to_tr);
  double r_lo = 0.0, r_hi = -1.0;
  if (r_stride > 0.0) {
    r_lo = (1.0 - theta) * p_stride / r_stride;
    r_hi = r_stride == to_bound ? theta * to_bound : to_tr;
  }
  double r_value = kInf;
  if (r_lo <= r_hi) {
    const auto q = build_quadratic_1d(J_h, g_h, r_h, diag_h, &p_h);
    const auto [t, val] = minimize_quadratic_1d(q, r_lo, r_hi);
    r_h = p_h + t * r_h;
    r = d.cwiseProduct(r_h);
    r_value = val;
  }

  // Truncated step, pulled back from the bound by theta.
  p *= theta;
  p_h *= theta;
  const double p_value = evaluate_quadratic(J_h, g_h, p_h, diag_h);

  // Anti-gradient (Cauchy) step.
  Vec ag_h = -g_h;
  Vec ag = d.cwiseProduct(ag_h);
  const double ag_to_tr = radius / ag_h.norm();
  const double ag_to_bound = step_size_to_bound(x, ag, lb, ub);
  const double ag_max = ag_to_bound < ag_to_tr ? theta * ag_to_bound : ag_to_tr;
  const auto qa = build_quadratic_1d(J_h, g_h, ag_h, diag_h);
  const auto [ag_t, ag_value] = minimize_quadratic_1d(qa, 0.0, ag_max);
  ag_h *= ag_t;
  ag *= ag_t;

  if (p_value < r_value && p_value < ag_value) return {p, p_h, -p_value};
  if (r_value < p_value && r_value < ag_value) return {r, r_h, -r_value};
  return {ag, ag_h, -ag_value};
}

}  // namespace trf

template <LeastSquaresProblem Problem>
TrustRegionResult solve_bounded_least_squares(Problem& problem, const Vec& x_init, const Vec& lb,
                                              const Vec& ub,
                                              const TrustRegionOptions& opt = {}) {
  using namespace trf;
  const Eigen::Index n = x_init.size();

  TrustRegionResult res;
  Vec x = make_strictly_feasible(x_init, lb, ub, 1e-10);
  Vec f;
  if (!problem.residuals(x, f)) {
    res.x = x;
    res.cost = kInf;
    res.status = "initial point outside model domain";
    return res;
  }
  res.evaluations = 1;
  const Eigen::Index m = f.size();
  Mat J(m, n);
  problem.jacobian(x, f, J);
  double cost = 0.5 * f.squaredNorm();
  Vec g = J.transpose() * f;

  Vec v, dv;
  scaling_vector(x, g, lb, ub, v, dv);
  double radius = (x.array() / v.array().sqrt()).matrix().norm();
  if (radius == 0.0 || !std::isfinite(radius)) radius = 1.0;

  Mat J_aug(m + n, n);
  Vec f_aug(m + n);
  double alpha = 0.0;
  const int max_evaluations = 100 * opt.max_iterations;

  for (int iteration = 0;; ++iteration) {
    scaling_vector(x, g, lb, ub, v, dv);
    const double g_norm = g.cwiseProduct(v).lpNorm<Eigen::Infinity>();
    if (g_norm < opt.gtol) {
      res.converged = true;
      res.status = "gradient tolerance";
      break;
    }
    if (iteration >= opt.max_iterations || res.evaluations >= max_evaluations) {
      res.status = "iteration limit";
      break;
    }

    const Vec d = v.cwiseSqrt();
    const Vec diag_h = g.cwiseProduct(dv);
    const Vec g_h = d.cwiseProduct(g);

    J_aug.topRows(m) = J * d.asDiagonal();
    J_aug.bottomRows(n) = diag_h.cwiseSqrt().asDiagonal();
    f_aug.head(m) = f;
    f_aug.tail(n).setZero();
    const Mat J_h = J_aug.topRows(m);

    // Thin SVD through QR: J_aug = Q R, R = U_r S V'.
    Eigen::HouseholderQR<Mat> qr(J_aug);
    const Vec qtf = (qr.householderQ().adjoint() * f_aug).head(n);
    const Mat R = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Mat> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec s = svd.singularValues();
    const Mat& V = svd.matrixV();
    const Vec uf = svd.matrixU().transpose() * qtf;

    const double theta = std::max(0.995, 1.0 - g_norm);
    double actual_reduction = -1.0;
    double step_norm = 0.0;
    double ratio = 0.0;
    bool terminate = false;
    Vec x_new, f_new;
    double cost_new = cost;

    while (actual_reduction <= 0.0 && res.evaluations < max_evaluations) {
      const Vec p_h = solve_subproblem(uf, s, V, radius, alpha, m);
      const Vec p = d.cwiseProduct(p_h);
      const SelectedStep sel = select_step(x, J_h, diag_h, g_h, p, p_h, d, radius, lb, ub, theta);

      x_new = make_strictly_feasible(x + sel.step, lb, ub, 0.0);
      ++res.evaluations;
      const double step_h_norm = sel.step_h.norm();
      if (!problem.residuals(x_new, f_new) || !f_new.allFinite()) {
        radius = 0.25 * step_h_norm;
        res.log.push_back({iteration, cost, 0.0, radius, 0.0, false});
        if (radius < kEps) break;
        continue;
      }
      cost_new = 0.5 * f_new.squaredNorm();
      actual_reduction = cost - cost_new;

      // Radius update from the gain ratio.
      const double pred = sel.predicted_reduction;
      if (pred > 0.0) ratio = actual_reduction / pred;
      else if (pred == actual_reduction) ratio = 1.0;
      else ratio = 0.0;
      double radius_new = radius;
      if (ratio < 0.25) radius_new = 0.25 * step_h_norm;
      else if (ratio > 0.75 && step_h_norm > 0.95 * radius) radius_new = 2.0 * radius;

      step_norm = sel.step.norm();
      const bool ftol_ok = actual_reduction < opt.ftol * cost && ratio > 0.25;
      const bool xtol_ok = step_norm < opt.xtol * (opt.xtol + x.norm());
      if (ftol_ok || xtol_ok) {
        terminate = true;
        res.status = ftol_ok ? "cost tolerance" : "step tolerance";
      }
      if (actual_reduction <= 0.0)
        res.log.push_back({iteration, cost, 0.0, radius_new, ratio, false});
      if (terminate) {
        radius = radius_new;
        break;
      }
      if (radius_new > 0.0) alpha *= radius / radius_new;
      radius = radius_new;
    }

    if (actual_reduction > 0.0) {
      x = x_new;
      f = f_new;
      cost = cost_new;
      problem.jacobian(x, f, J);
      g = J.transpose() * f;
      res.log.push_back({iteration, cost, step_norm, radius, ratio, true});
    }
    res.iterations = iteration + 1;
    if (terminate) {
      res.converged = true;
      break;
    }
    if (actual_reduction <= 0.0) {
      // Could not find a decreasing step even after shrinking the region.
      res.converged = radius < kEps;
      res.status = res.converged ? "step tolerance" : "no decreasing step";
      break;
    }
  }
  res.x = x;
  res.cost = cost;
  return res;
}

}  // namespace selfsense::opt
