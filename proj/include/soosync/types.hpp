#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace soosync {

using Complex = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Thrown when an argument violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Uniformly sampled complex baseband record.
struct IqBuffer {
  std::vector<Complex> samples;
  double sample_duration_t = 0.0;  // seconds per sample

  IqBuffer() = default;
  IqBuffer(std::vector<Complex> s, double t) : samples(std::move(s)), sample_duration_t(t) {}

  [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
  [[nodiscard]] bool empty() const noexcept { return samples.empty(); }
  [[nodiscard]] double duration() const noexcept {
    return static_cast<double>(samples.size()) * sample_duration_t;
  }
  [[nodiscard]] std::span<const Complex> view() const noexcept { return samples; }

  /// Samples [first, first + count) as a new buffer.
  [[nodiscard]] IqBuffer slice(std::size_t first, std::size_t count) const {
    if (first + count > samples.size()) {
      throw InvalidArgument("IqBuffer::slice out of range");
    }
    return IqBuffer(std::vector<Complex>(samples.begin() + static_cast<std::ptrdiff_t>(first),
                                         samples.begin() + static_cast<std::ptrdiff_t>(first + count)),
                    sample_duration_t);
  }
};

inline double mean_power(std::span<const Complex> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& v : x) acc += std::norm(v);
  return acc / static_cast<double>(x.size());
}

inline double energy(std::span<const Complex> x) {
  double acc = 0.0;
  for (const auto& v : x) acc += std::norm(v);
  return acc;
}

inline bool all_finite(std::span<const Complex> x) {
  for (const auto& v : x) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

inline bool is_power_of_two(std::size_t v) noexcept { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace soosync
