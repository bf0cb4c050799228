#pragma once

// Per-channel clock impairments and thermal noise:
//
//   out[n] = x((1 + xi) n T + tau) * exp(j(-2 pi eps n T + phi)) + w[n]
//
// x(.) between grid points is evaluated with a Kaiser-windowed sinc of
// kChannelKernelHalfWidth taps per side. The output drops kChannelEdgeMargin
// samples at each end of the input, and output index 0 corresponds to input
// index kChannelEdgeMargin; the shift is common to every channel and so
// cancels in all differential quantities.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>

#include "soosync/kernels.hpp"
#include "soosync/random.hpp"
#include "soosync/types.hpp"

namespace soosync {

inline constexpr int kChannelKernelHalfWidth = 64;
inline constexpr double kChannelKernelBeta = 12.0;
inline constexpr std::size_t kChannelEdgeMargin = 128;
inline constexpr double kMaxAbsSco = 1e-3;

struct ImpairmentSet {
  double tau = 0.0;      // s, timing offset relative to the common reference
  double epsilon = 0.0;  // Hz, carrier frequency offset
  double xi = 0.0;       // sampling clock offset (relative)
  double phi = 0.0;      // rad, residual carrier phase in [-pi, pi)
  double esn0_db = std::numeric_limits<double>::infinity();  // +inf: noiseless
  std::uint64_t noise_seed = 0;

  void validate() const {
    if (!std::isfinite(tau) || !std::isfinite(epsilon) || !std::isfinite(xi) || !std::isfinite(phi)) {
      throw InvalidArgument("impairments: tau, epsilon, xi and phi must be finite");
    }
    if (std::abs(xi) >= kMaxAbsSco) throw InvalidArgument("impairments: |xi| must be below 1e-3");
    if (phi < -std::numbers::pi || phi >= std::numbers::pi) {
      throw InvalidArgument("impairments: phi must lie in [-pi, pi)");
    }
    if (std::isnan(esn0_db) || esn0_db == -std::numeric_limits<double>::infinity()) {
      throw InvalidArgument("impairments: esn0_db must be finite or +inf");
    }
  }
};

/// Differential synchronisation parameters between station 0 and station 1.
struct DifferentialSync {
  double d_tau = 0.0;      // s
  double d_epsilon = 0.0;  // Hz
  double d_xi = 0.0;

  DifferentialSync operator-() const { return {-d_tau, -d_epsilon, -d_xi}; }
  bool operator==(const DifferentialSync&) const = default;
};

inline DifferentialSync differential(const ImpairmentSet& a, const ImpairmentSet& b) {
  return {a.tau - b.tau, a.epsilon - b.epsilon, a.xi - b.xi};
}

/// Per-sample complex noise variance for a signal of mean power es.
inline double noise_variance(double es, double esn0_db) {
  if (esn0_db == std::numeric_limits<double>::infinity()) return 0.0;
  return es * std::pow(10.0, -esn0_db / 10.0);
}

namespace detail {

inline const kernels::PolyphaseKaiserSinc& channel_kernel_table() {
  static const kernels::PolyphaseKaiserSinc table(kChannelKernelHalfWidth, kChannelKernelBeta, 4096);
  return table;
}

// x evaluated at fractional index n0 + mu using precomputed taps; samples
// outside the record count as zero.
inline Complex interpolate_at(std::span<const Complex> x, std::ptrdiff_t n0, const double* taps) {
  constexpr std::ptrdiff_t K = kChannelKernelHalfWidth;
  const auto size = static_cast<std::ptrdiff_t>(x.size());
  std::ptrdiff_t k_lo = -K + 1;
  std::ptrdiff_t k_hi = K;
  if (n0 + k_lo < 0) k_lo = -n0;
  if (n0 + k_hi > size - 1) k_hi = size - 1 - n0;
  double re = 0.0;
  double im = 0.0;
  for (std::ptrdiff_t k = k_lo; k <= k_hi; ++k) {
    const Complex& v = x[static_cast<std::size_t>(n0 + k)];
    const double h = taps[k + K - 1];
    re += h * v.real();
    im += h * v.imag();
  }
  return {re, im};
}

}  // namespace detail

/// Applies timing offset, SCO, CFO, carrier phase and AWGN to one channel.
/// Output length is x.size() - 2 * kChannelEdgeMargin.
inline IqBuffer apply_impairments(const IqBuffer& x, const ImpairmentSet& imp) {
  imp.validate();
  if (x.size() <= 2 * kChannelEdgeMargin) throw InvalidArgument("apply_impairments: input shorter than edge margin");
  if (!all_finite(x.view())) throw InvalidArgument("apply_impairments: input contains non-finite samples");
  if (std::abs(imp.tau) > x.duration()) throw InvalidArgument("apply_impairments: |tau| exceeds the buffer duration");

  constexpr int K = kChannelKernelHalfWidth;
  const double t_s = x.sample_duration_t;
  const std::size_t m = x.size() - 2 * kChannelEdgeMargin;
  const double shift = static_cast<double>(kChannelEdgeMargin) + imp.tau / t_s;
  std::vector<Complex> out(m);

  const double rounded = std::round(shift);
  const bool integer_shift = std::abs(shift - rounded) < 1e-9;
  if (imp.xi == 0.0 && integer_shift) {
    const auto offset = static_cast<std::ptrdiff_t>(rounded);
    const auto size = static_cast<std::ptrdiff_t>(x.size());
    for (std::size_t n = 0; n < m; ++n) {
      const std::ptrdiff_t i = static_cast<std::ptrdiff_t>(n) + offset;
      out[n] = (i >= 0 && i < size) ? x.samples[static_cast<std::size_t>(i)] : Complex{};
    }
  } else if (imp.xi == 0.0) {
    // Constant fractional part: one exact tap set for the whole record.
    const double base = std::floor(shift);
    const double mu = shift - base;
    std::vector<double> taps(2 * K);
    for (int k = -K + 1; k <= K; ++k) taps[k + K - 1] = kernels::kaiser_sinc(mu - k, K, kChannelKernelBeta);
    const auto n0_base = static_cast<std::ptrdiff_t>(base);
    for (std::size_t n = 0; n < m; ++n) {
      out[n] = detail::interpolate_at(x.view(), n0_base + static_cast<std::ptrdiff_t>(n), taps.data());
    }
  } else {
    const auto& table = detail::channel_kernel_table();
    std::vector<double> taps(2 * K);
    const double rate = 1.0 + imp.xi;
    for (std::size_t n = 0; n < m; ++n) {
      const double pos = shift + rate * static_cast<double>(n);
      const double base = std::floor(pos);
      const double mu = pos - base;
      table.taps_for(mu, taps.data());
      out[n] = detail::interpolate_at(x.view(), static_cast<std::ptrdiff_t>(base), taps.data());
    }
  }

  if (imp.epsilon != 0.0 || imp.phi != 0.0) {
    for (std::size_t n = 0; n < m; ++n) {
      const double arg = -kTwoPi * imp.epsilon * static_cast<double>(n) * t_s + imp.phi;
      out[n] *= std::polar(1.0, arg);
    }
  }

  const double variance = noise_variance(mean_power(x.view()), imp.esn0_db);
  if (variance > 0.0) {
    Rng rng(imp.noise_seed);
    ComplexGaussian gauss(variance);
    for (auto& v : out) v += gauss(rng);
  }
  return IqBuffer(std::move(out), t_s);
}

}  // namespace soosync
