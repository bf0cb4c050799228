#pragma once

// Farrow-structure fractional interpolation. Each tap weight is a polynomial
// in the fractional offset, so
//
//   x(n0 + mu) = sum_m s^m * v_m[n0],   v_m[n0] = sum_k c[m][k] x[n0 + first + k]
//
// with s = 2 mu - 1 for mu in [0, 1). Two coefficient sets are provided: the
// classic 4-tap cubic Lagrange interpolator and a polynomial fit to a
// Kaiser-windowed sinc, which holds its delay accuracy across a signal band
// filling three quarters of the Nyquist range.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "soosync/kernels.hpp"
#include "soosync/types.hpp"

namespace soosync {

class FarrowInterpolator {
 public:
  /// Cubic Lagrange through samples n0-1 .. n0+2.
  static FarrowInterpolator cubic_lagrange() {
    const std::vector<double> nodes{-1.0, 0.0, 1.0, 2.0};
    return fit(-1, 4, 3, [&](double mu, std::size_t k) {
      double p = 1.0;
      for (std::size_t m = 0; m < nodes.size(); ++m) {
        if (m != k) p *= (mu - nodes[m]) / (nodes[k] - nodes[m]);
      }
      return p;
    }, false);
  }

  /// Windowed-sinc taps n0-half_width+1 .. n0+half_width, each approximated by
  /// a degree-`degree` polynomial interpolating the exact taps at
  /// Chebyshev-Lobatto nodes (which include mu = 0 and mu = 1). Taps are
  /// normalized to unit sum at every node, so constants pass unchanged.
  static FarrowInterpolator windowed_sinc(int half_width = 12, int degree = 8, double beta = 8.0) {
    if (half_width < 2 || degree < 1) throw InvalidArgument("farrow: bad windowed-sinc design");
    const auto taps = static_cast<std::size_t>(2 * half_width);
    return fit(-half_width + 1, taps, degree, [=](double mu, std::size_t k) {
      const double offset = static_cast<double>(static_cast<int>(k) - half_width + 1);
      return kernels::kaiser_sinc(mu - offset, half_width, beta);
    }, true);
  }

  [[nodiscard]] std::size_t taps() const noexcept { return taps_; }
  [[nodiscard]] int degree() const noexcept { return degree_; }
  [[nodiscard]] int first_tap() const noexcept { return first_; }

  /// x at fractional index `position`; samples outside the record count as zero.
  [[nodiscard]] Complex evaluate(std::span<const Complex> x, double position) const {
    const double base = std::floor(position);
    const double s = 2.0 * (position - base) - 1.0;
    const auto n0 = static_cast<std::ptrdiff_t>(base) + first_;
    const auto size = static_cast<std::ptrdiff_t>(x.size());
    const bool interior = n0 >= 0 && n0 + static_cast<std::ptrdiff_t>(taps_) <= size;

    Complex acc{};
    for (int m = degree_; m >= 0; --m) {
      const double* c = &coeffs_[static_cast<std::size_t>(m) * taps_];
      double re = 0.0;
      double im = 0.0;
      if (interior) {
        const Complex* xp = x.data() + n0;
        for (std::size_t k = 0; k < taps_; ++k) {
          re += c[k] * xp[k].real();
          im += c[k] * xp[k].imag();
        }
      } else {
        for (std::size_t k = 0; k < taps_; ++k) {
          const auto i = n0 + static_cast<std::ptrdiff_t>(k);
          if (i < 0 || i >= size) continue;
          re += c[k] * x[static_cast<std::size_t>(i)].real();
          im += c[k] * x[static_cast<std::size_t>(i)].imag();
        }
      }
      acc = acc * s + Complex(re, im);
    }
    return acc;
  }

  /// Tap weights at fractional offset mu, for inspection and tests.
  [[nodiscard]] std::vector<double> weights(double mu) const {
    const double s = 2.0 * mu - 1.0;
    std::vector<double> w(taps_, 0.0);
    for (int m = degree_; m >= 0; --m) {
      for (std::size_t k = 0; k < taps_; ++k) w[k] = w[k] * s + coeffs_[static_cast<std::size_t>(m) * taps_ + k];
    }
    return w;
  }

 private:
  template <typename TapFn>
  static FarrowInterpolator fit(int first, std::size_t taps, int degree, TapFn tap, bool normalize) {
    const auto points = static_cast<Eigen::Index>(degree + 1);
    Eigen::MatrixXd vander(points, points);
    Eigen::MatrixXd values(points, static_cast<Eigen::Index>(taps));
    for (Eigen::Index i = 0; i < points; ++i) {
      const double s = -std::cos(std::numbers::pi * static_cast<double>(i) / degree);
      const double mu = 0.5 * (s + 1.0);
      double p = 1.0;
      for (Eigen::Index m = 0; m < points; ++m, p *= s) vander(i, m) = p;
      double sum = 0.0;
      for (std::size_t k = 0; k < taps; ++k) {
        values(i, static_cast<Eigen::Index>(k)) = tap(mu, k);
        sum += values(i, static_cast<Eigen::Index>(k));
      }
      if (normalize) values.row(i) /= sum;
    }
    const Eigen::MatrixXd c = vander.partialPivLu().solve(values);

    FarrowInterpolator f;
    f.first_ = first;
    f.taps_ = taps;
    f.degree_ = degree;
    f.coeffs_.resize(static_cast<std::size_t>(points) * taps);
    for (Eigen::Index m = 0; m < points; ++m) {
      for (std::size_t k = 0; k < taps; ++k) {
        f.coeffs_[static_cast<std::size_t>(m) * taps + k] = c(m, static_cast<Eigen::Index>(k));
      }
    }
    return f;
  }

  FarrowInterpolator() = default;

  int first_ = 0;
  std::size_t taps_ = 0;
  int degree_ = 0;
  std::vector<double> coeffs_;  // [degree + 1][taps]
};

/// Resamples x onto the grid (1 + xi_hat) n. The time origin is kept; the
/// output stops before the interpolator's support would run past the end of
/// the input. The first -first_tap() outputs draw on a zero-extended head.
inline IqBuffer farrow_resample(const IqBuffer& x, double xi_hat, const FarrowInterpolator& interp) {
  if (!std::isfinite(xi_hat) || std::abs(xi_hat) >= 1e-3) throw InvalidArgument("farrow_resample: |xi| must be below 1e-3");
  if (xi_hat == 0.0) return x;
  const double rate = 1.0 + xi_hat;
  const double last_tap = static_cast<double>(interp.first_tap() + static_cast<int>(interp.taps()) - 1);
  const double limit = static_cast<double>(x.size()) - 1.0 - last_tap;
  std::size_t count = x.size();
  if (rate * static_cast<double>(count - 1) > limit) {
    count = limit < 0.0 ? 0 : static_cast<std::size_t>(std::floor(limit / rate)) + 1;
  }
  std::vector<Complex> out(count);
  for (std::size_t n = 0; n < count; ++n) out[n] = interp.evaluate(x.view(), rate * static_cast<double>(n));
  return IqBuffer(std::move(out), x.sample_duration_t);
}

inline const FarrowInterpolator& default_farrow() {
  static const FarrowInterpolator f = FarrowInterpolator::windowed_sinc();
  return f;
}

inline IqBuffer farrow_resample(const IqBuffer& x, double xi_hat) { return farrow_resample(x, xi_hat, default_farrow()); }

}  // namespace soosync
