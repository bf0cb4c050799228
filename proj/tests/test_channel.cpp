#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "soosync/channel.hpp"
#include "soosync/waveform.hpp"

using namespace soosync;

namespace {

constexpr double kT = 1.0 / 2097152.0;
constexpr std::size_t kM = kChannelEdgeMargin;

IqBuffer noise(std::size_t n, std::uint64_t seed) {
  WaveformSpec s;
  s.num_samples = n;
  s.rng_seed = seed;
  return generate_rect_noise(s);
}

// Sum of in-band complex tones, evaluated analytically at fractional sample index u.
struct Tones {
  std::vector<double> f{-7.0e5, -1.234e5, 5.0e4, 6.9e5};
  std::vector<Complex> a{{0.6, 0.1}, {-0.2, 0.7}, {0.5, -0.5}, {0.3, 0.3}};
  Complex at(double u) const {
    Complex s{};
    for (std::size_t k = 0; k < f.size(); ++k) s += a[k] * std::polar(1.0, kTwoPi * f[k] * u * kT);
    return s;
  }
  IqBuffer sampled(std::size_t n) const {
    std::vector<Complex> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = at(static_cast<double>(i));
    return IqBuffer(std::move(v), kT);
  }
};

double rel_rms(const std::vector<Complex>& a, const std::vector<Complex>& b, std::size_t from, std::size_t to) {
  double e = 0.0;
  double p = 0.0;
  for (std::size_t i = from; i < to; ++i) {
    e += std::norm(a[i] - b[i]);
    p += std::norm(b[i]);
  }
  return std::sqrt(e / p);
}

}  // namespace

TEST(Channel, IdentityImpairmentTrimsMargin) {
  const IqBuffer x = noise(4096, 1);
  const IqBuffer y = apply_impairments(x, ImpairmentSet{});
  ASSERT_EQ(y.size(), x.size() - 2 * kM);
  for (std::size_t n = 0; n < y.size(); ++n) EXPECT_EQ(y.samples[n], x.samples[n + kM]);
}

TEST(Channel, IntegerDelayShifts) {
  const IqBuffer x = noise(4096, 2);
  ImpairmentSet imp;
  imp.tau = 5 * kT;
  const IqBuffer y = apply_impairments(x, imp);
  for (std::size_t n = 0; n < y.size(); ++n) EXPECT_EQ(y.samples[n], x.samples[n + kM + 5]);
  imp.tau = -3 * kT;
  const IqBuffer z = apply_impairments(x, imp);
  for (std::size_t n = 0; n < z.size(); ++n) EXPECT_EQ(z.samples[n], x.samples[n + kM - 3]);
}

TEST(Channel, FractionalDelayMatchesAnalyticSignal) {
  const Tones tones;
  const IqBuffer x = tones.sampled(8192);
  for (double d : {0.25, 0.5, 37.5e-9 / kT, -2.7}) {
    ImpairmentSet imp;
    imp.tau = d * kT;
    const IqBuffer y = apply_impairments(x, imp);
    std::vector<Complex> ref(y.size());
    for (std::size_t n = 0; n < y.size(); ++n) ref[n] = tones.at(static_cast<double>(n + kM) + d);
    EXPECT_LT(rel_rms(y.samples, ref, 64, y.size() - 64), 1e-5) << "delay " << d;
  }
}

TEST(Channel, ScoMatchesAnalyticSignal) {
  const Tones tones;
  const std::size_t n = 1u << 16;
  const IqBuffer x = tones.sampled(n);
  for (double xi : {5e-4, -3e-4, 7.5e-6}) {
    ImpairmentSet imp;
    imp.xi = xi;
    imp.tau = 0.3 * kT;
    const IqBuffer y = apply_impairments(x, imp);
    std::vector<Complex> ref(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) ref[k] = tones.at(kM + 0.3 + (1 + xi) * static_cast<double>(k));
    // Skip the samples whose support leaves the record.
    const std::size_t tail = static_cast<std::size_t>(std::abs(xi) * n) + 64;
    EXPECT_LT(rel_rms(y.samples, ref, 64, y.size() - tail), 1e-5) << "xi " << xi;
  }
}

TEST(Channel, CfoPhaseSlope) {
  const IqBuffer x = noise(1u << 14, 3);
  ImpairmentSet imp;
  imp.epsilon = 100.0;
  const IqBuffer y = apply_impairments(x, imp);
  // Least-squares slope of the unwrapped phase of y[n] conj(x[n + margin]).
  std::vector<double> ph(y.size());
  double prev = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    const double a = std::arg(y.samples[n] * std::conj(x.samples[n + kM]));
    ph[n] = n == 0 ? a : ph[n - 1] + std::remainder(a - prev, kTwoPi);
    prev = a;
  }
  const double nn = static_cast<double>(ph.size());
  double st = 0, sp = 0, stt = 0, stp = 0;
  for (std::size_t n = 0; n < ph.size(); ++n) {
    st += n;
    sp += ph[n];
    stt += double(n) * n;
    stp += n * ph[n];
  }
  const double slope = (nn * stp - st * sp) / (nn * stt - st * st);
  EXPECT_NEAR(slope, -kTwoPi * 100.0 * kT, 1e-6);
}

TEST(Channel, CfoIsPureRotation) {
  const IqBuffer x = noise(8192, 4);
  ImpairmentSet base;
  base.tau = 0.37 * kT;
  ImpairmentSet rot = base;
  rot.epsilon = 1234.5;
  rot.phi = 2.0;
  const IqBuffer a = apply_impairments(x, base);
  const IqBuffer b = apply_impairments(x, rot);
  for (std::size_t n = 0; n < a.size(); ++n) {
    EXPECT_NEAR(std::abs(b.samples[n]), std::abs(a.samples[n]), 1e-12 * (1 + std::abs(a.samples[n])));
  }
  EXPECT_NEAR(std::arg(b.samples[0] / a.samples[0]), 2.0, 1e-12);
}

TEST(Channel, NoiseCalibration) {
  const IqBuffer x = noise((1u << 17) + 2 * kM, 5);
  const IqBuffer clean = apply_impairments(x, ImpairmentSet{});
  for (double db : {0.0, 10.0, 20.0, 30.0, 40.0}) {
    ImpairmentSet imp;
    imp.esn0_db = db;
    imp.noise_seed = 99;
    const IqBuffer y = apply_impairments(x, imp);
    double p = 0.0;
    for (std::size_t n = 0; n < y.size(); ++n) p += std::norm(y.samples[n] - clean.samples[n]);
    p /= static_cast<double>(y.size());
    const double expected = mean_power(x.view()) * std::pow(10.0, -db / 10.0);
    EXPECT_NEAR(10 * std::log10(expected / p), 0.0, 0.3) << db << " dB";
    if (db == 20.0) {
      EXPECT_NEAR(p, 0.01, 0.05 * 0.01);
    }
  }
}

TEST(Channel, NoiseDeterministicPerSeed) {
  const IqBuffer x = noise(2048, 6);
  ImpairmentSet imp;
  imp.esn0_db = 10;
  imp.noise_seed = 7;
  EXPECT_EQ(apply_impairments(x, imp).samples, apply_impairments(x, imp).samples);
  ImpairmentSet other = imp;
  other.noise_seed = 8;
  EXPECT_NE(apply_impairments(x, imp).samples, apply_impairments(x, other).samples);
}

TEST(Channel, DelaysCompose) {
  const IqBuffer x = noise(1u << 14, 7);
  ImpairmentSet a;
  a.tau = 0.31 * kT;
  ImpairmentSet b;
  b.tau = 1.45 * kT;
  ImpairmentSet ab;
  ab.tau = a.tau + b.tau;
  const IqBuffer twice = apply_impairments(apply_impairments(x, a), b);
  const IqBuffer once = apply_impairments(x, ab);
  std::vector<Complex> ref(once.samples.begin() + kM, once.samples.begin() + kM + twice.size());
  EXPECT_LT(rel_rms(twice.samples, ref, 64, twice.size() - 64), 1e-3);
}

TEST(Channel, RejectsBadInput) {
  const IqBuffer x = noise(1024, 8);
  ImpairmentSet imp;
  imp.xi = 1e-3;
  EXPECT_THROW(apply_impairments(x, imp), InvalidArgument);
  imp = {};
  imp.tau = 2 * x.duration();
  EXPECT_THROW(apply_impairments(x, imp), InvalidArgument);
  imp = {};
  imp.phi = std::numbers::pi;
  EXPECT_THROW(apply_impairments(x, imp), InvalidArgument);
  imp = {};
  imp.esn0_db = NAN;
  EXPECT_THROW(apply_impairments(x, imp), InvalidArgument);
  EXPECT_THROW(apply_impairments(noise(256, 1), ImpairmentSet{}), InvalidArgument);
  IqBuffer bad = x;
  bad.samples[3] = Complex(NAN, 0.0);
  EXPECT_THROW(apply_impairments(bad, ImpairmentSet{}), InvalidArgument);
}

TEST(Differential, Arithmetic) {
  ImpairmentSet a;
  a.tau = 5e-9;
  a.epsilon = 10.0;
  a.xi = 1e-8;
  ImpairmentSet b;
  b.tau = 2e-9;
  b.epsilon = 4.0;
  b.xi = 3e-8;
  const DifferentialSync d = differential(a, b);
  EXPECT_NEAR(d.d_tau, 3e-9, 1e-24);
  EXPECT_DOUBLE_EQ(d.d_epsilon, 6.0);
  EXPECT_NEAR(d.d_xi, -2e-8, 1e-23);
  EXPECT_EQ(differential(a, a), (DifferentialSync{0, 0, 0}));
}

TEST(Differential, Antisymmetric) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    ImpairmentSet a;
    ImpairmentSet b;
    a.tau = u(rng) * 1e-6;
    b.tau = u(rng) * 1e-6;
    a.epsilon = u(rng) * 1e3;
    b.epsilon = u(rng) * 1e3;
    a.xi = u(rng) * 1e-5;
    b.xi = u(rng) * 1e-5;
    EXPECT_EQ(differential(a, b), -differential(b, a));
  }
}
