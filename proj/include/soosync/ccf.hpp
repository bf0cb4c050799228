#pragma once

// Cross-correlation R[m] = sum_n conj(x[n]) y[n + m] computed through the
// cross spectrum, with band-limited evaluation at fractional lags for
// sub-sample peak refinement. A positive peak lag means y lags x.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "soosync/fft.hpp"
#include "soosync/types.hpp"

namespace soosync {

struct CcfResult {
  std::vector<Complex> values;  // lags -max_lag .. +max_lag
  std::ptrdiff_t max_lag = 0;
  std::ptrdiff_t peak_lag = 0;
  double peak_phase = 0.0;      // rad
  double peak_magnitude = 0.0;  // |R[peak]| / sqrt(Ex Ey)

  [[nodiscard]] Complex at(std::ptrdiff_t lag) const { return values[static_cast<std::size_t>(lag + max_lag)]; }
};

/// Sub-sample correlation peak.
struct CcfPeak {
  std::ptrdiff_t coarse_lag = 0;
  double lag = 0.0;             // samples, fractional
  Complex value;                // R evaluated at `lag`
  double peak_magnitude = 0.0;  // |value| / sqrt(Ex Ey)
};

/// Linear cross-correlation of two equal-length sequences and its
/// band-limited continuation to fractional lags.
class CrossCorrelator {
 public:
  CrossCorrelator(std::span<const Complex> x, std::span<const Complex> y, std::size_t max_lag)
      : n_(x.size()), max_lag_(static_cast<std::ptrdiff_t>(max_lag)) {
    if (x.size() != y.size()) throw InvalidArgument("ccf: length mismatch");
    if (x.empty()) throw InvalidArgument("ccf: empty input");
    if (max_lag >= x.size()) throw InvalidArgument("ccf: max_lag must be smaller than the length");

    nfft_ = fft::next_pow2(2 * n_ - 1);
    fft::AlignedVector xs(nfft_, Complex{});
    spectrum_.assign(nfft_, Complex{});
    std::copy(x.begin(), x.end(), xs.begin());
    std::copy(y.begin(), y.end(), spectrum_.begin());
    fft::forward(xs);
    fft::forward(spectrum_);
    for (std::size_t k = 0; k < nfft_; ++k) spectrum_[k] *= std::conj(xs[k]);

    lags_ = spectrum_;
    fft::inverse(lags_);
    const double scale = 1.0 / static_cast<double>(nfft_);
    for (auto& v : lags_) v *= scale;

    norm_ = std::sqrt(energy(x) * energy(y));

    double best = -1.0;
    for (std::ptrdiff_t m = -max_lag_; m <= max_lag_; ++m) {
      const double mag = std::abs(coarse(m));
      if (mag > best) {
        best = mag;
        coarse_peak_ = m;
      }
    }
  }

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] std::ptrdiff_t max_lag() const noexcept { return max_lag_; }
  [[nodiscard]] double norm() const noexcept { return norm_; }
  [[nodiscard]] std::ptrdiff_t coarse_peak() const noexcept { return coarse_peak_; }

  /// R at an integer lag, |lag| <= size() - 1.
  [[nodiscard]] Complex coarse(std::ptrdiff_t lag) const {
    const auto n = static_cast<std::ptrdiff_t>(nfft_);
    return lags_[static_cast<std::size_t>(((lag % n) + n) % n)];
  }

  /// R at a fractional lag, by evaluating the inverse transform of the cross
  /// spectrum off the integer grid (symmetric bin ordering).
  [[nodiscard]] Complex evaluate(double lag) const {
    const std::size_t n = nfft_;
    const double w = kTwoPi * lag / static_cast<double>(n);
    const std::size_t half = n / 2;
    constexpr std::size_t kReseed = 512;
    double re = 0.0;
    double im = 0.0;
    // Bins 0 .. n/2-1 carry frequencies 0 .. n/2-1; bins n/2 .. n-1 carry -n/2 .. -1.
    for (std::size_t block = 0; block < n; block += kReseed) {
      const std::size_t end = std::min(n, block + kReseed);
      const double f0 = block < half ? static_cast<double>(block)
                                     : static_cast<double>(block) - static_cast<double>(n);
      Complex rot = std::polar(1.0, w * f0);
      const Complex step = std::polar(1.0, w);
      for (std::size_t k = block; k < end; ++k) {
        if (k == half) rot = std::polar(1.0, -w * static_cast<double>(half));
        const Complex c = spectrum_[k] * rot;
        re += c.real();
        im += c.imag();
        rot *= step;
      }
    }
    return Complex(re, im) / static_cast<double>(n);
  }

  /// Peak refined on a grid of 1/upsample_factor samples around the coarse
  /// peak, then by a parabola through the three largest grid magnitudes.
  [[nodiscard]] CcfPeak refine_peak(int upsample_factor) const { return refine_from(coarse_peak_, upsample_factor); }

  /// Same, with the coarse peak searched only within `radius` lags of `around`.
  [[nodiscard]] CcfPeak refine_peak(int upsample_factor, std::ptrdiff_t around, std::ptrdiff_t radius) const {
    const std::ptrdiff_t lo = std::max(-max_lag_, around - radius);
    const std::ptrdiff_t hi = std::min(max_lag_, around + radius);
    if (lo > hi) throw InvalidArgument("ccf: search window outside the lag range");
    std::ptrdiff_t m0 = lo;
    double best = -1.0;
    for (std::ptrdiff_t m = lo; m <= hi; ++m) {
      const double mag = std::abs(coarse(m));
      if (mag > best) {
        best = mag;
        m0 = m;
      }
    }
    return refine_from(m0, upsample_factor);
  }

  /// Vertex offset in (-0.5, 0.5) of the parabola through (-1, a), (0, b), (1, c).
  static double parabolic_vertex(double a, double b, double c) {
    const double denom = a - 2.0 * b + c;
    if (denom >= 0.0) return 0.0;
    return std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
  }

 private:
  CcfPeak refine_from(std::ptrdiff_t m0, int upsample_factor) const {
    if (upsample_factor < 2) throw InvalidArgument("ccf: upsample factor must be >= 2");
    const double u = upsample_factor;

    auto coarse_mag = [&](std::ptrdiff_t m) { return std::abs(coarse(m)); };
    double start = parabolic_vertex(coarse_mag(m0 - 1), coarse_mag(m0), coarse_mag(m0 + 1));
    std::ptrdiff_t k = static_cast<std::ptrdiff_t>(std::lround(start * u));

    std::map<std::ptrdiff_t, double> grid;
    auto fine = [&](std::ptrdiff_t j) {
      if (j % upsample_factor == 0) return coarse_mag(m0 + j / upsample_factor);
      auto it = grid.find(j);
      if (it != grid.end()) return it->second;
      const double v = std::abs(evaluate(static_cast<double>(m0) + static_cast<double>(j) / u));
      grid.emplace(j, v);
      return v;
    };
    const std::ptrdiff_t limit = upsample_factor;
    while (k < limit && fine(k + 1) > fine(k)) ++k;
    while (k > -limit && fine(k - 1) > fine(k)) --k;

    const double frac = parabolic_vertex(fine(k - 1), fine(k), fine(k + 1));
    CcfPeak peak;
    peak.coarse_lag = m0;
    peak.lag = static_cast<double>(m0) + (static_cast<double>(k) + frac) / u;
    peak.value = evaluate(peak.lag);
    peak.peak_magnitude = norm_ > 0.0 ? std::abs(peak.value) / norm_ : 0.0;
    return peak;
  }

  std::size_t n_;
  std::size_t nfft_ = 0;
  std::ptrdiff_t max_lag_;
  fft::AlignedVector spectrum_;
  fft::AlignedVector lags_;
  double norm_ = 0.0;
  std::ptrdiff_t coarse_peak_ = 0;
};

inline CcfResult ccf(const IqBuffer& x, const IqBuffer& y, std::size_t max_lag) {
  if (x.sample_duration_t != y.sample_duration_t) throw InvalidArgument("ccf: sample durations differ");
  CrossCorrelator corr(x.view(), y.view(), max_lag);
  CcfResult r;
  r.max_lag = corr.max_lag();
  r.values.reserve(static_cast<std::size_t>(2 * r.max_lag + 1));
  for (std::ptrdiff_t m = -r.max_lag; m <= r.max_lag; ++m) r.values.push_back(corr.coarse(m));
  r.peak_lag = corr.coarse_peak();
  const Complex peak = corr.coarse(r.peak_lag);
  r.peak_phase = std::arg(peak);
  r.peak_magnitude = corr.norm() > 0.0 ? std::abs(peak) / corr.norm() : 0.0;
  return r;
}

}  // namespace soosync
