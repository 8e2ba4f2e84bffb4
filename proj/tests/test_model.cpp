#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "selfsense/model.hpp"
#include "selfsense/plant.hpp"

using namespace selfsense;
using model::DynamicParams;
using model::InductanceParams;
using model::ModelCoeffs;

namespace {

// Coefficient vector whose lambdas do not depend on P.
InductanceParams constant_lambdas(double l1, double l2, double l3, double l4, double l5) {
  return InductanceParams{{0, l1, 0, l2, 0, l3, 0, l4, 0, l5}};
}

double central_difference(const InductanceParams& ip, double F, double P) {
  const double h = std::max(1e-6, 1e-6 * F);
  return (model::eval_inductance(ip, F + h, P) - model::eval_inductance(ip, F - h, P)) / (2 * h);
}

}  // namespace

TEST(DynamicForce, SlackLengthZeroPressure) {
  EXPECT_DOUBLE_EQ(model::eval_dynamic_force(DynamicParams{}, 0.100, 0.0), 0.0);
}

TEST(DynamicForce, HandArithmetic) {
  const DynamicParams d{38.6, 0.100, 1.6310};
  EXPECT_NEAR(model::eval_dynamic_force(d, 0.200, 0.2), 38.6 * 0.1 + 1.631 * 0.2, 1e-12);
  EXPECT_NEAR(model::eval_dynamic_force(d, 0.200, 0.2), 4.1862, 1e-12);
  EXPECT_NEAR(model::eval_dynamic_force(d, 0.100, 0.5), 0.8155, 1e-12);
}

TEST(DynamicForce, AffineInLength) {
  const DynamicParams d{38.6, 0.100, 1.6310};
  for (double P : {0.0, 0.13, 0.65})
    for (double x : {0.05, 0.12, 0.19})
      EXPECT_NEAR(model::eval_dynamic_force(d, x, P) - model::eval_dynamic_force(d, d.x0, P), d.k * (x - d.x0),
                  1e-13);
}

TEST(DynamicLength, Inverse) {
  const DynamicParams d{38.6, 0.100, 1.6310};
  EXPECT_NEAR(model::invert_dynamic_length(d, 0.0, 0.0), 0.100, 1e-15);
  EXPECT_NEAR(model::invert_dynamic_length(d, 4.1862, 0.2), 0.200, 1e-12);
}

TEST(DynamicLength, RoundTrip) {
  const DynamicParams d{38.6, 0.100, 1.6310};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(0.05, 0.2), uP(0.0, 0.65);
  for (int i = 0; i < 100; ++i) {
    const double x = ux(rng), P = uP(rng);
    const double back = model::invert_dynamic_length(d, model::eval_dynamic_force(d, x, P), P);
    EXPECT_NEAR(back, x, 1e-12 * x);
  }
}

TEST(DynamicLength, DegenerateStiffness) {
  EXPECT_THROW(model::invert_dynamic_length(DynamicParams{0.0, 0.1, 1.6}, 1.0, 0.2), DegenerateError);
}

TEST(Coefficients, ZeroPressureGivesIntercepts) {
  const auto ip = plant::reference_inductance_params();
  const auto m = model::eval_coeffs(ip, 0.0);
  EXPECT_EQ(m.lambda1, ip.p[1]);
  EXPECT_EQ(m.lambda2, ip.p[3]);
  EXPECT_EQ(m.lambda3, ip.p[5]);
  EXPECT_EQ(m.lambda4, ip.p[7]);
  EXPECT_EQ(m.lambda5, ip.p[9]);
}

TEST(Coefficients, OnlyOffsetSet) {
  InductanceParams ip;
  ip.p[9] = 0.5;
  for (double P : {0.0, 0.3, 0.65}) {
    const auto m = model::eval_coeffs_unchecked(ip, P);
    EXPECT_EQ(m.lambda1, 0.0);
    EXPECT_EQ(m.lambda2, 0.0);
    EXPECT_EQ(m.lambda3, 0.0);
    EXPECT_EQ(m.lambda4, 0.0);
    EXPECT_EQ(m.lambda5, 0.5);
  }
  // lambda2 = lambda4 = 0 is outside the envelope.
  EXPECT_THROW(model::eval_coeffs(ip, 0.3), EnvelopeError);
}

TEST(Coefficients, HandArithmetic) {
  const InductanceParams ip{{1, 0, 0, 1, 0, 0, 0, 1, 0, 2}};
  const auto m = model::eval_coeffs(ip, 0.3);
  EXPECT_NEAR(m.lambda1, 0.3, 1e-15);
  EXPECT_EQ(m.lambda2, 1.0);
  EXPECT_EQ(m.lambda3, 0.0);
  EXPECT_EQ(m.lambda4, 1.0);
  EXPECT_EQ(m.lambda5, 2.0);
}

TEST(Coefficients, PressureOutsideEnvelope) {
  const auto ip = plant::reference_inductance_params();
  EXPECT_THROW(model::eval_coeffs(ip, 0.9, model::OperatingEnvelope{}), EnvelopeError);
  EXPECT_THROW(model::eval_coeffs(ip, -0.1, model::OperatingEnvelope{}), EnvelopeError);
}

TEST(Inductance, ZeroForceIsOffset) {
  const auto ip = plant::reference_inductance_params();
  for (double P = 0.0; P <= 0.65; P += 0.05)
    EXPECT_EQ(model::eval_inductance(ip, 0.0, P), model::eval_coeffs(ip, P).lambda5);
}

TEST(Inductance, HandArithmetic) {
  EXPECT_NEAR(model::eval_inductance(constant_lambdas(2, 1, 0, 1, 1), 3.0, 0.4), 7.0, 1e-12);
  EXPECT_NEAR(model::eval_inductance(constant_lambdas(1, 2, -1, 1, 0), 1.0, 0.4), std::exp(-1.0), 1e-12);
}

TEST(Inductance, NegativeForceRejected) {
  EXPECT_THROW(model::eval_inductance(plant::reference_inductance_params(), -0.1, 0.2), DomainError);
}

TEST(Gradient, LinearCase) {
  EXPECT_NEAR(model::d_inductance_dF(constant_lambdas(2, 1, 0, 1, 1), 3.0, 0.1), 2.0, 1e-12);
}

TEST(Gradient, MatchesCentralDifferences) {
  const auto ip = plant::reference_inductance_params();
  for (int i = 0; i < 20; ++i) {
    const double F = 0.01 + (5.0 - 0.01) * i / 19.0;
    for (int j = 0; j < 20; ++j) {
      const double P = 0.65 * j / 19.0;
      const double a = model::d_inductance_dF(ip, F, P);
      const double fd = central_difference(ip, F, P);
      EXPECT_LE(std::abs(a - fd), 1e-6 * std::max(std::abs(a), 1e-3)) << "F=" << F << " P=" << P;
    }
  }
}

TEST(Gradient, ZeroAtPeak) {
  const auto ip = plant::reference_inductance_params();
  for (double P : {0.0, 0.3, 0.65}) {
    const auto m = model::eval_coeffs(ip, P);
    // Bisection on the bracketed factor l2 + l3 l4 F^l4.
    auto factor = [&](double F) { return m.lambda2 + m.lambda3 * m.lambda4 * std::pow(F, m.lambda4); };
    double lo = 0.01, hi = 5.0;
    ASSERT_GT(factor(lo), 0.0);
    ASSERT_LT(factor(hi), 0.0);
    for (int k = 0; k < 200; ++k) (factor(0.5 * (lo + hi)) > 0 ? lo : hi) = 0.5 * (lo + hi);
    const double peak = 0.5 * (lo + hi);
    EXPECT_NEAR(model::d_inductance_dF(m, peak), 0.0, 1e-9);
    EXPECT_NEAR(*model::peak_force(m), peak, 1e-10);
  }
}

TEST(Gradient, SingleInteriorMaximum) {
  const auto ip = plant::reference_inductance_params();
  for (double P = 0.0; P <= 0.65 + 1e-12; P += 0.05) {
    const auto m = model::eval_coeffs(ip, P);
    int sign_changes = 0;
    double prev = model::d_inductance_dF(m, 1e-3);
    for (int i = 1; i <= 5000; ++i) {
      const double g = model::d_inductance_dF(m, 1e-3 + 5.0 * i / 5000.0);
      if ((g > 0) != (prev > 0)) {
        ++sign_changes;
        EXPECT_GT(prev, 0.0);  // rise then fall
      }
      prev = g;
    }
    EXPECT_EQ(sign_changes, 1) << "P=" << P;
  }
}

TEST(Gradient, ParameterGradientMatchesFiniteDifferences) {
  const auto ip = plant::reference_inductance_params();
  for (double F : {0.0, 0.4, 1.7, 3.9})
    for (double P : {0.0, 0.35, 0.65}) {
      const auto g = model::d_inductance_dp(model::eval_coeffs(ip, P), F, P);
      for (std::size_t j = 0; j < 10; ++j) {
        InductanceParams a = ip, b = ip;
        const double h = 1e-6 * std::max(1.0, std::abs(ip.p[j]));
        a.p[j] += h;
        b.p[j] -= h;
        const double fd = (model::eval_inductance(a, F, P) - model::eval_inductance(b, F, P)) / (2 * h);
        EXPECT_NEAR(g[j], fd, 1e-7 * std::max(1.0, std::abs(fd))) << "j=" << j << " F=" << F << " P=" << P;
      }
    }
}

TEST(Gradient, RejectsZeroForce) {
  EXPECT_THROW(model::d_inductance_dF(plant::reference_inductance_params(), 0.0, 0.2), DomainError);
}
