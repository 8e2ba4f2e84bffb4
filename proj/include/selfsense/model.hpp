#pragma once

// Control-oriented force model and the pressure-dependent inductance map.
//
//   F(x, P)  = k (x - x0) + c P
//   L(F, P)  = l1 F^l2 exp(l3 F^l4) + l5,   li(P) = p[2i-2] P + p[2i-1]
//
// Units are fixed across the library: length m, force N, pressure MPa,
// inductance uH.

#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include "selfsense/errors.hpp"

namespace selfsense::model {

struct DynamicParams {
  double k = 38.6;     // N/m
  double x0 = 0.100;   // m
  double c = 1.6310;   // N/MPa

  void validate() const {
    if (!(std::isfinite(k) && std::isfinite(x0) && std::isfinite(c)))
      throw ConfigError("dynamic params must be finite");
    if (!(k > 0.0) || !(c > 0.0) || !(x0 > 0.0))
      throw ConfigError("dynamic params require k > 0, c > 0, x0 > 0");
  }

  friend bool operator==(const DynamicParams&, const DynamicParams&) = default;
};

inline constexpr std::size_t kNumInductanceParams = 10;

/// Ten coefficients; pair i (0-based) holds slope and intercept of lambda_{i+1}(P).
struct InductanceParams {
  std::array<double, kNumInductanceParams> p{};

  double slope(int i) const { return p[2 * (i - 1)]; }
  double intercept(int i) const { return p[2 * (i - 1) + 1]; }

  void validate() const {
    for (double v : p)
      if (!std::isfinite(v)) throw ConfigError("inductance params must be finite");
  }

  friend bool operator==(const InductanceParams&, const InductanceParams&) = default;
};

struct OperatingEnvelope {
  double P_min = 0.0, P_max = 0.70;  // MPa
  double F_min = 0.0, F_max = 5.0;   // N
  double x_min = 0.05, x_max = 0.20; // m
  double L_min = 4.0, L_max = 6.5;   // uH

  double force_span() const { return F_max - F_min; }
  bool contains_pressure(double P) const { return P >= P_min && P <= P_max; }
  bool contains_force(double F) const { return F >= F_min && F <= F_max; }

  void validate() const {
    if (!(P_min < P_max) || !(F_min < F_max) || !(x_min < x_max) || !(L_min < L_max))
      throw ConfigError("operating envelope requires min < max for every channel");
    if (F_min < 0.0 || P_min < 0.0)
      throw ConfigError("operating envelope requires F_min >= 0 and P_min >= 0");
  }
};

struct ModelCoeffs {
  double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0, lambda4 = 0.0, lambda5 = 0.0;
};

// ---------------------------------------------------------------------------
// Dynamic model

inline double eval_dynamic_force(const DynamicParams& d, double x, double P) {
  return d.k * (x - d.x0) + d.c * P;
}

inline double invert_dynamic_length(const DynamicParams& d, double F, double P,
                                    double eps = 1e-12) {
  if (!(std::abs(d.k) >= eps)) throw DegenerateError("stiffness k is degenerate");
  return d.x0 + (F - d.c * P) / d.k;
}

// ---------------------------------------------------------------------------
// Inductance map

namespace detail {

inline std::string coeff_message(double P, double l2, double l4) {
  std::ostringstream os;
  os << "inductance coefficients leave the envelope at P=" << P << " (lambda2=" << l2
     << ", lambda4=" << l4 << ")";
  return os.str();
}

}  // namespace detail

/// Coefficients with no envelope check; the fitter probes invalid regions.
inline ModelCoeffs eval_coeffs_unchecked(const InductanceParams& ip, double P) {
  const auto& p = ip.p;
  return {p[0] * P + p[1], p[2] * P + p[3], p[4] * P + p[5], p[6] * P + p[7], p[8] * P + p[9]};
}

inline bool coeffs_valid(const ModelCoeffs& m) {
  return m.lambda2 > 0.0 && m.lambda4 > 0.0 && std::isfinite(m.lambda1) &&
         std::isfinite(m.lambda2) && std::isfinite(m.lambda3) && std::isfinite(m.lambda4) &&
         std::isfinite(m.lambda5);
}

inline ModelCoeffs eval_coeffs(const InductanceParams& ip, double P) {
  ModelCoeffs m = eval_coeffs_unchecked(ip, P);
  if (!coeffs_valid(m)) throw EnvelopeError(detail::coeff_message(P, m.lambda2, m.lambda4));
  return m;
}

inline ModelCoeffs eval_coeffs(const InductanceParams& ip, double P,
                               const OperatingEnvelope& env) {
  if (!env.contains_pressure(P)) {
    std::ostringstream os;
    os << "pressure " << P << " MPa outside [" << env.P_min << ", " << env.P_max << "]";
    throw EnvelopeError(os.str());
  }
  return eval_coeffs(ip, P);
}

// F^l is evaluated as exp(l ln F); at F = 0 it is 0 (l2, l4 > 0), so L(0, P) = l5.
inline double eval_inductance(const ModelCoeffs& m, double F) {
  if (!(F >= 0.0)) throw DomainError("inductance map requires F >= 0");
  if (F == 0.0) return m.lambda5;
  const double lnF = std::log(F);
  return m.lambda1 * std::exp(m.lambda2 * lnF + m.lambda3 * std::exp(m.lambda4 * lnF)) +
         m.lambda5;
}

inline double eval_inductance(const InductanceParams& ip, double F, double P) {
  return eval_inductance(eval_coeffs(ip, P), F);
}

inline double d_inductance_dF(const ModelCoeffs& m, double F) {
  if (!(F > 0.0)) throw DomainError("dL/dF requires F > 0");
  const double lnF = std::log(F);
  const double Fl4 = std::exp(m.lambda4 * lnF);
  return m.lambda1 * std::exp((m.lambda2 - 1.0) * lnF + m.lambda3 * Fl4) *
         (m.lambda2 + m.lambda3 * m.lambda4 * Fl4);
}

inline double d_inductance_dF(const InductanceParams& ip, double F, double P) {
  return d_inductance_dF(eval_coeffs(ip, P), F);
}

/// Location of the interior maximum of L(., P) - l5, if the curve has one (l3 < 0, l1 > 0).
inline std::optional<double> peak_force(const ModelCoeffs& m) {
  if (!(m.lambda3 < 0.0) || !(m.lambda1 > 0.0) || !coeffs_valid(m)) return std::nullopt;
  return std::pow(-m.lambda2 / (m.lambda3 * m.lambda4), 1.0 / m.lambda4);
}

/// Gradient of L(F, P) with respect to the ten coefficients.
/// Terms carrying ln F vanish at F = 0 (they are multiplied by F^l2 -> 0).
inline std::array<double, kNumInductanceParams> d_inductance_dp(const ModelCoeffs& m,
                                                                double F, double P) {
  std::array<double, 5> dl{};
  dl[4] = 1.0;
  if (F > 0.0) {
    const double lnF = std::log(F);
    const double Fl2 = std::exp(m.lambda2 * lnF);
    const double Fl4 = std::exp(m.lambda4 * lnF);
    const double e = std::exp(m.lambda3 * Fl4);
    const double core = Fl2 * e;  // F^l2 exp(l3 F^l4)
    dl[0] = core;
    dl[1] = m.lambda1 * core * lnF;
    dl[2] = m.lambda1 * core * Fl4;
    dl[3] = m.lambda1 * core * m.lambda3 * Fl4 * lnF;
  }
  std::array<double, kNumInductanceParams> g{};
  for (int i = 0; i < 5; ++i) {
    g[2 * i] = dl[i] * P;
    g[2 * i + 1] = dl[i];
  }
  return g;
}

}  // namespace selfsense::model
