#pragma once

// Butterworth low-pass design (bilinear transform with pre-warping) realised
// as cascaded second-order sections, plus integer-factor decimation.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "selfsense/errors.hpp"

namespace selfsense::dsp {

struct FilterSpec {
  int order = 3;
  double cutoff_hz = 10.0;
  double sample_rate_hz = 100.0;  // sensor rate, not the control rate

  void validate() const {
    if (order < 1) throw ConfigError("filter order must be >= 1");
    if (!(sample_rate_hz > 0.0)) throw ConfigError("filter sample rate must be positive");
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < 0.5 * sample_rate_hz))
      throw ConfigError("filter cutoff must lie in (0, Nyquist)");
  }
};

/// Transposed direct-form II section. First-order sections have b2 = a2 = 0.
struct Section {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
  double z1 = 0.0, z2 = 0.0;

  double step(double x) {
    const double y = b0 * x + z1;
    z1 = b1 * x - a1 * y + z2;
    z2 = b2 * x - a2 * y;
    return y;
  }

  std::complex<double> response(double omega) const {
    const std::complex<double> e1 = std::polar(1.0, -omega);
    const std::complex<double> e2 = e1 * e1;
    return (b0 + b1 * e1 + b2 * e2) / (1.0 + a1 * e1 + a2 * e2);
  }
};

class FilterState {
 public:
  FilterState() = default;
  FilterState(FilterSpec spec, std::vector<Section> sections)
      : spec_(spec), sections_(std::move(sections)) {}

  double step(double x) {
    for (Section& s : sections_) x = s.step(x);
    return x;
  }

  /// Set the delay line to the steady state of a constant input `value`.
  void prime(double value) {
    for (Section& s : sections_) {
      // Every section has unity DC gain, so each sees `value` at steady state.
      s.z2 = (s.b2 - s.a2) * value;
      s.z1 = (s.b1 - s.a1) * value + s.z2;
    }
  }

  void reset() {
    for (Section& s : sections_) s.z1 = s.z2 = 0.0;
  }

  std::complex<double> response(double f_hz) const {
    const double omega = 2.0 * std::numbers::pi * f_hz / spec_.sample_rate_hz;
    std::complex<double> h{1.0, 0.0};
    for (const Section& s : sections_) h *= s.response(omega);
    return h;
  }

  double magnitude_db(double f_hz) const { return 20.0 * std::log10(std::abs(response(f_hz))); }

  /// Roots of every section's feedback polynomial.
  std::vector<std::complex<double>> poles() const {
    std::vector<std::complex<double>> out;
    for (const Section& s : sections_) {
      if (s.a2 == 0.0) {
        out.emplace_back(-s.a1, 0.0);
        continue;
      }
      const std::complex<double> disc = std::sqrt(std::complex<double>(s.a1 * s.a1 - 4.0 * s.a2));
      out.push_back(0.5 * (-s.a1 + disc));
      out.push_back(0.5 * (-s.a1 - disc));
    }
    return out;
  }

  bool stable() const {
    for (const auto& p : poles())
      if (!(std::abs(p) < 1.0)) return false;
    return true;
  }

  const FilterSpec& spec() const { return spec_; }
  const std::vector<Section>& sections() const { return sections_; }

 private:
  FilterSpec spec_{};
  std::vector<Section> sections_;
};

inline FilterState design(const FilterSpec& spec) {
  spec.validate();
  const double fs = spec.sample_rate_hz;
  const double K = 2.0 * fs;
  const double wc = K * std::tan(std::numbers::pi * spec.cutoff_hz / fs);  // pre-warped
  const int N = spec.order;

  std::vector<Section> sections;
  for (int k = 0; k < N / 2; ++k) {
    // Prototype pole pair p = -sin(theta) +- j cos(theta); section s^2 + a s + 1.
    const double theta = std::numbers::pi * (2.0 * k + 1.0) / (2.0 * N);
    const double a = 2.0 * std::sin(theta);
    const double d0 = K * K + a * wc * K + wc * wc;
    Section s;
    s.a1 = (2.0 * wc * wc - 2.0 * K * K) / d0;
    s.a2 = (K * K - a * wc * K + wc * wc) / d0;
    const double g = (1.0 + s.a1 + s.a2) / 4.0;  // unity gain at z = 1
    s.b0 = g;
    s.b1 = 2.0 * g;
    s.b2 = g;
    sections.push_back(s);
  }
  if (N % 2 == 1) {
    Section s;
    s.a1 = (wc - K) / (K + wc);
    const double g = (1.0 + s.a1) / 2.0;
    s.b0 = g;
    s.b1 = g;
    sections.push_back(s);
  }
  return FilterState(spec, std::move(sections));
}

inline double step(FilterState& state, double sample) { return state.step(sample); }

/// Batch application; identical arithmetic to repeated step() calls.
inline std::vector<double> filter(FilterState& state, std::span<const double> input) {
  std::vector<double> out;
  out.reserve(input.size());
  for (double v : input) out.push_back(state.step(v));
  return out;
}

/// Keeps samples 0, factor, 2*factor, ...
template <class T>
std::vector<T> decimate(std::span<const T> series, int factor) {
  if (factor < 1) throw ConfigError("decimation factor must be >= 1");
  std::vector<T> out;
  out.reserve((series.size() + static_cast<std::size_t>(factor) - 1) /
              static_cast<std::size_t>(factor));
  for (std::size_t i = 0; i < series.size(); i += static_cast<std::size_t>(factor))
    out.push_back(series[i]);
  return out;
}

template <class T>
std::vector<T> decimate(const std::vector<T>& series, int factor) {
  return decimate(std::span<const T>(series), factor);
}

}  // namespace selfsense::dsp
