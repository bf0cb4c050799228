#pragma once

// Modified Cramer-Rao bounds for timing and carrier-frequency estimation from
// L samples of duration T at a per-sample Es/N0.
//
//   MCRB(tau) = T^2 / (8 pi^2 L Gamma) * N0/Es,  Gamma = int T^2 f^2 |G|^2 / int |G|^2
//   rectangular spectrum of width B:  Gamma = T^2 B^2 / 12,
//                                     MCRB(tau) = 3 / (2 pi^2 L B^2) * N0/Es
//   MCRB(eps) = 3 T / (2 pi^2 (L T)^3) * N0/Es

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>

#include "soosync/types.hpp"

namespace soosync {

struct BoundQuery {
  double l = 0.0;        // observation length, samples
  double t = 0.0;        // sample duration, s
  double b = 0.0;        // bandwidth, Hz (timing bound only)
  double esn0_db = 0.0;  // dB

  void validate() const {
    if (!std::isfinite(l) || l < 1.0) throw InvalidArgument("bounds: L must be >= 1");
    if (!std::isfinite(t) || !(t > 0.0)) throw InvalidArgument("bounds: T must be positive");
    if (!std::isfinite(b) || !(b > 0.0)) throw InvalidArgument("bounds: B must be positive");
    if (!std::isfinite(esn0_db)) throw InvalidArgument("bounds: Es/N0 must be finite");
  }
};

struct BoundPoint {
  double mcrb_tau = 0.0;       // s^2
  double mcrb_eps = 0.0;       // Hz^2
  double sqrt_mcrb_tau = 0.0;  // s
  double sqrt_mcrb_eps = 0.0;  // Hz
};

/// Power ratio; 10 dB -> 10.
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double gamma_rect(double t, double b) { return t * t * b * b / 12.0; }

/// Gamma of a sampled power spectrum |G(f)|^2 by trapezoidal quadrature on the
/// supplied (monotone) frequency grid. Independent of the spectrum's scale.
inline double gamma_numeric(std::span<const double> frequency_hz, std::span<const double> power, double t) {
  if (frequency_hz.size() != power.size() || frequency_hz.size() < 2) {
    throw InvalidArgument("gamma_numeric: grid and spectrum must have equal length >= 2");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i + 1 < power.size(); ++i) {
    if (power[i] < 0.0 || power[i + 1] < 0.0) throw InvalidArgument("gamma_numeric: negative spectrum value");
    const double df = frequency_hz[i + 1] - frequency_hz[i];
    const double f0 = frequency_hz[i];
    const double f1 = frequency_hz[i + 1];
    num += 0.5 * df * (f0 * f0 * power[i] + f1 * f1 * power[i + 1]);
    den += 0.5 * df * (power[i] + power[i + 1]);
  }
  if (!(den > 0.0)) throw InvalidArgument("gamma_numeric: spectrum integrates to zero");
  return t * t * num / den;
}

/// Convergence helper: evaluates gamma_numeric for psd(f) on uniform grids
/// over [f_lo, f_hi], doubling the point count (from 2^10) until consecutive
/// results agree to rel_tol or 2^24 points are reached.
inline double gamma_numeric_converged(const std::function<double(double)>& psd, double f_lo, double f_hi, double t,
                                      double rel_tol = 1e-9) {
  if (!(f_hi > f_lo)) throw InvalidArgument("gamma_numeric_converged: empty frequency range");
  auto eval = [&](std::size_t points) {
    std::vector<double> f(points);
    std::vector<double> p(points);
    const double df = (f_hi - f_lo) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) {
      f[i] = f_lo + df * static_cast<double>(i);
      p[i] = psd(f[i]);
    }
    return gamma_numeric(f, p, t);
  };
  std::size_t points = std::size_t{1} << 10;
  double previous = eval(points);
  while (points < (std::size_t{1} << 24)) {
    points = 2 * points - 1;  // nested grid
    const double current = eval(points);
    if (std::abs(current - previous) <= rel_tol * std::abs(current)) return current;
    previous = current;
  }
  return previous;
}

inline double mcrb_tau_general(const BoundQuery& q, double gamma) {
  q.validate();
  if (!(gamma > 0.0)) throw InvalidArgument("mcrb_tau_general: gamma must be positive");
  const double pi2 = std::numbers::pi * std::numbers::pi;
  return q.t * q.t / (8.0 * pi2 * q.l * gamma) / db_to_linear(q.esn0_db);
}

inline double mcrb_tau(const BoundQuery& q) {
  q.validate();
  const double pi2 = std::numbers::pi * std::numbers::pi;
  return 3.0 / (2.0 * pi2 * q.l * q.b * q.b) / db_to_linear(q.esn0_db);
}

inline double mcrb_epsilon(const BoundQuery& q) {
  q.validate();
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const double lt = q.l * q.t;
  return 3.0 * q.t / (2.0 * pi2 * lt * lt * lt) / db_to_linear(q.esn0_db);
}

inline BoundPoint evaluate_bounds(const BoundQuery& q) {
  BoundPoint p;
  p.mcrb_tau = mcrb_tau(q);
  p.mcrb_eps = mcrb_epsilon(q);
  p.sqrt_mcrb_tau = std::sqrt(p.mcrb_tau);
  p.sqrt_mcrb_eps = std::sqrt(p.mcrb_eps);
  return p;
}

/// Distance of a measured standard deviation from a variance bound,
/// 10 log10(sigma^2 / bound).
inline double gap_db(double sigma, double bound_variance) {
  return 10.0 * std::log10(sigma * sigma / bound_variance);
}

}  // namespace soosync
