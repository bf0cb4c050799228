#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace soosync::kernels {

/// Normalized sinc, sin(pi x) / (pi x).
inline double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

/// Kaiser window evaluated at offset u from the centre, support |u| <= half_width.
inline double kaiser(double u, double half_width, double beta) {
  const double r = u / half_width;
  if (std::abs(r) > 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - r * r)) / std::cyl_bessel_i(0.0, beta);
}

/// Kaiser-windowed sinc interpolation kernel with cutoff at the Nyquist frequency.
inline double kaiser_sinc(double u, double half_width, double beta) {
  return sinc(u) * kaiser(u, half_width, beta);
}

/// Polyphase table of kaiser_sinc taps. Row j holds the 2*half_width taps
/// for fractional offset mu = j / phases; taps for arbitrary mu are linearly
/// interpolated between adjacent rows. Tap k (k = -half_width+1 .. half_width)
/// weights sample n0 + k when evaluating at n0 + mu.
class PolyphaseKaiserSinc {
 public:
  PolyphaseKaiserSinc(int half_width, double beta, int phases)
      : half_width_(half_width), phases_(phases), width_(2 * static_cast<std::size_t>(half_width)) {
    table_.resize((static_cast<std::size_t>(phases) + 1) * width_);
    for (int j = 0; j <= phases; ++j) {
      const double mu = static_cast<double>(j) / phases;
      for (int k = -half_width + 1; k <= half_width; ++k) {
        table_[static_cast<std::size_t>(j) * width_ + static_cast<std::size_t>(k + half_width - 1)] =
            kaiser_sinc(mu - k, half_width, beta);
      }
    }
  }

  /// Fills taps[0 .. 2*half_width) for fractional offset mu in [0, 1).
  void taps_for(double mu, double* taps) const {
    const double pos = mu * phases_;
    auto j = static_cast<std::size_t>(pos);
    if (j >= static_cast<std::size_t>(phases_)) j = static_cast<std::size_t>(phases_) - 1;
    const double frac = pos - static_cast<double>(j);
    const double* a = &table_[j * width_];
    const double* b = a + width_;
    for (std::size_t i = 0; i < width_; ++i) taps[i] = a[i] + frac * (b[i] - a[i]);
  }

  [[nodiscard]] int half_width() const noexcept { return half_width_; }

 private:
  int half_width_;
  int phases_;
  std::size_t width_;
  std::vector<double> table_;
};

}  // namespace soosync::kernels
