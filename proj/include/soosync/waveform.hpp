#pragma once

// Signal-of-opportunity surrogates: band-limited complex Gaussian noise with an
// exactly rectangular spectrum, and a DAB-like OFDM signal. Both generators
// return unit average power so that Es = 1 per sample.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

#include "soosync/fft.hpp"
#include "soosync/random.hpp"
#include "soosync/types.hpp"

namespace soosync {

enum class WaveformKind { RectNoise, Ofdm };

struct WaveformSpec {
  double sample_duration_t = 1.0 / 2097152.0;  // 2^-21 s
  double bandwidth_b = 1.536e6;                // Hz
  std::size_t num_samples = 1u << 21;
  WaveformKind kind = WaveformKind::RectNoise;
  std::size_t ofdm_fft_size = 2048;
  std::size_t ofdm_active_carriers = 1536;
  std::size_t ofdm_guard_samples = 504;
  std::uint64_t rng_seed = 1;

  void validate() const {
    if (!(sample_duration_t > 0.0) || !std::isfinite(sample_duration_t)) {
      throw InvalidArgument("waveform: sample duration must be positive");
    }
    if (num_samples == 0) throw InvalidArgument("waveform: num_samples must be > 0");
    if (!(bandwidth_b > 0.0)) throw InvalidArgument("waveform: bandwidth must be positive");
    // Small slack so that B = 1/T computed in floating point is accepted.
    if (bandwidth_b * sample_duration_t > 1.0 + 1e-12) {
      throw InvalidArgument("waveform: bandwidth exceeds the complex sampling rate 1/T");
    }
    if (kind == WaveformKind::Ofdm) {
      if (ofdm_fft_size < 4) throw InvalidArgument("ofdm: fft size too small");
      if (ofdm_active_carriers == 0 || ofdm_active_carriers % 2 != 0) {
        throw InvalidArgument("ofdm: active carriers must be even and non-zero (symmetric around DC)");
      }
      if (ofdm_active_carriers >= ofdm_fft_size) {
        throw InvalidArgument("ofdm: active carriers must leave the DC carrier unused (active < fft size)");
      }
      if (ofdm_guard_samples >= ofdm_fft_size) {
        throw InvalidArgument("ofdm: guard interval must be shorter than the fft size");
      }
    }
  }
};

/// Carrier spacing times active carriers.
inline double ofdm_occupied_bandwidth(const WaveformSpec& spec) {
  return static_cast<double>(spec.ofdm_active_carriers) /
         (static_cast<double>(spec.ofdm_fft_size) * spec.sample_duration_t);
}

namespace detail {

inline void normalize_unit_power(std::vector<Complex>& x) {
  const double p = mean_power(x);
  if (!(p > 0.0)) throw std::runtime_error("waveform: generated signal has zero power");
  const double g = 1.0 / std::sqrt(p);
  for (auto& v : x) v *= g;
}

}  // namespace detail

/// Complex Gaussian noise whose spectrum is flat on [-B/2, B/2] and zero
/// elsewhere, built by filling in-band DFT bins and inverse transforming.
inline IqBuffer generate_rect_noise(const WaveformSpec& spec) {
  spec.validate();
  if (spec.kind != WaveformKind::RectNoise) throw InvalidArgument("generate_rect_noise: kind must be RectNoise");

  const std::size_t n = spec.num_samples;
  const double fs = 1.0 / spec.sample_duration_t;
  const double half_band = 0.5 * spec.bandwidth_b;
  Rng rng(spec.rng_seed);
  ComplexGaussian gauss(1.0);

  fft::AlignedVector bins(n, Complex{});
  for (std::size_t k = 0; k < n; ++k) {
    // Signed bin index in [-n/2, n/2).
    const auto signed_k = (k < (n + 1) / 2) ? static_cast<double>(k)
                                            : static_cast<double>(k) - static_cast<double>(n);
    const double f = signed_k * fs / static_cast<double>(n);
    // Draw for every bin so the in-band values do not depend on B.
    const Complex z = gauss(rng);
    if (std::abs(f) <= half_band * (1.0 + 1e-12)) bins[k] = z;
  }
  fft::inverse(bins);

  std::vector<Complex> out(bins.begin(), bins.end());
  detail::normalize_unit_power(out);
  return IqBuffer(std::move(out), spec.sample_duration_t);
}

/// OFDM with QPSK on carriers +-1..+-active/2 (DC unused) and a cyclic
/// prefix of ofdm_guard_samples ahead of every symbol.
inline IqBuffer generate_ofdm(const WaveformSpec& spec) {
  spec.validate();
  if (spec.kind != WaveformKind::Ofdm) throw InvalidArgument("generate_ofdm: kind must be Ofdm");

  const std::size_t nfft = spec.ofdm_fft_size;
  const std::size_t half = spec.ofdm_active_carriers / 2;
  const std::size_t guard = spec.ofdm_guard_samples;
  const std::size_t sym_len = nfft + guard;
  const double amp = 1.0 / std::sqrt(2.0);

  Rng rng(spec.rng_seed);
  std::bernoulli_distribution bit(0.5);

  std::vector<Complex> out;
  out.reserve(spec.num_samples + sym_len);
  fft::AlignedVector bins(nfft);
  while (out.size() < spec.num_samples) {
    std::fill(bins.begin(), bins.end(), Complex{});
    auto qpsk = [&] { return Complex(bit(rng) ? amp : -amp, bit(rng) ? amp : -amp); };
    for (std::size_t k = 1; k <= half; ++k) {
      bins[k] = qpsk();
      bins[nfft - k] = qpsk();
    }
    fft::inverse(bins);
    out.insert(out.end(), bins.end() - static_cast<std::ptrdiff_t>(guard), bins.end());
    out.insert(out.end(), bins.begin(), bins.end());
  }
  out.resize(spec.num_samples);
  detail::normalize_unit_power(out);
  return IqBuffer(std::move(out), spec.sample_duration_t);
}

inline IqBuffer generate_waveform(const WaveformSpec& spec) {
  return spec.kind == WaveformKind::RectNoise ? generate_rect_noise(spec) : generate_ofdm(spec);
}

/// Averaged periodogram. Non-overlapping rectangular segments of length
/// segment_len; bins ordered from -fs/2 upwards. Units: power per bin,
/// normalized so that the bins sum to the mean sample power.
struct Periodogram {
  std::vector<double> frequency_hz;
  std::vector<double> power;
};

inline Periodogram averaged_periodogram(const IqBuffer& x, std::size_t segment_len) {
  if (segment_len == 0 || segment_len > x.size()) throw InvalidArgument("periodogram: bad segment length");
  const std::size_t segments = x.size() / segment_len;
  std::vector<double> acc(segment_len, 0.0);
  fft::AlignedVector buf(segment_len);
  for (std::size_t s = 0; s < segments; ++s) {
    std::copy_n(x.samples.begin() + static_cast<std::ptrdiff_t>(s * segment_len), segment_len, buf.begin());
    fft::forward(buf);
    for (std::size_t k = 0; k < segment_len; ++k) acc[k] += std::norm(buf[k]);
  }
  const double scale = 1.0 / (static_cast<double>(segments) * static_cast<double>(segment_len) *
                              static_cast<double>(segment_len));
  Periodogram out;
  out.frequency_hz.resize(segment_len);
  out.power.resize(segment_len);
  const double fs = 1.0 / x.sample_duration_t;
  const std::size_t shift = segment_len / 2;
  for (std::size_t i = 0; i < segment_len; ++i) {
    const std::size_t k = (i + segment_len - shift) % segment_len;
    out.power[i] = acc[k] * scale;
    out.frequency_hz[i] = (static_cast<double>(i) - static_cast<double>(shift)) * fs / static_cast<double>(segment_len);
  }
  return out;
}

}  // namespace soosync
