#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include "soosync/types.hpp"

namespace soosync {

using Rng = std::mt19937_64;

/// Deterministic 64-bit seed from a list of integers (e.g. master seed,
/// trial index, stream id). Distinct lists give independent streams.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  words.reserve(parts.size() * 2);
  for (auto p : parts) {
    words.push_back(static_cast<std::uint32_t>(p & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

/// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
class ComplexGaussian {
 public:
  explicit ComplexGaussian(double variance = 1.0) : normal_(0.0, std::sqrt(variance / 2.0)) {}

  Complex operator()(Rng& rng) { return {normal_(rng), normal_(rng)}; }

 private:
  std::normal_distribution<double> normal_;
};

}  // namespace soosync
