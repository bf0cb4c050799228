#pragma once

// Differential synchronisation estimator.
//
// 1. Iterative CFO: for L = l_start, 2 l_start, ..., l_final both channels are
//    cut into consecutive slices of L/2 samples, the phase of every slice-pair
//    correlation peak is unwrapped, and the least-squares phase slope gives the
//    CFO increment. An observation of L samples thus spans two slices and
//    resolves |d_eps| < 1 / (T L) without ambiguity. Each increment is removed
//    from channel y before the next (longer) stage.
// 2. SCO: d_xi = d_eps / f_soo; channel y is resampled by a Farrow interpolator.
// 3. Timing: correlation over l_final samples, peak refined by upsampling and
//    parabolic interpolation.
//
// Conventions: x is station 0, y is station 1, all corrections are applied to
// y. d_tau > 0 means y lags x (x[n] ~ y[n + d_tau / T]); d_eps > 0 means
// station 0's frequency offset exceeds station 1's.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <vector>

#include "soosync/ccf.hpp"
#include "soosync/farrow.hpp"
#include "soosync/types.hpp"

namespace soosync {

enum class SegmentHop { NonOverlapping };
enum class PhaseFit { LsSlope };

/// Samples skipped at the start of every timing window so the resampler's
/// zero-extended head never enters the correlation.
inline constexpr std::size_t kTimingHeadGuard = 32;
inline constexpr std::size_t kLagBlockSpan = std::size_t{1} << 14;

struct CorrelationOptions {
  std::size_t max_lag = 256;         // peak search range, samples
  int upsample_factor = 64;
  double detection_threshold = 0.1;  // minimum normalized peak magnitude
};

struct EstimatorConfig {
  std::size_t l_start = std::size_t{1} << 10;
  std::size_t l_final = std::size_t{1} << 17;
  int upsample_factor = 64;
  double f_soo = 0.0;  // Hz, nominal SoO carrier; must be set by the caller
  std::size_t max_lag = 256;
  double detection_threshold = 0.1;
  SegmentHop segment_hop = SegmentHop::NonOverlapping;
  PhaseFit phase_fit = PhaseFit::LsSlope;

  void validate() const {
    if (!is_power_of_two(l_start) || !is_power_of_two(l_final)) {
      throw InvalidArgument("estimator: l_start and l_final must be powers of two");
    }
    if (l_start < 4 || l_start > l_final) throw InvalidArgument("estimator: need 4 <= l_start <= l_final");
    if (upsample_factor < 2) throw InvalidArgument("estimator: upsample_factor must be >= 2");
    if (!(f_soo > 0.0) || !std::isfinite(f_soo)) throw InvalidArgument("estimator: f_soo must be a positive frequency");
    if (!(detection_threshold >= 0.0 && detection_threshold < 1.0)) {
      throw InvalidArgument("estimator: detection threshold must lie in [0, 1)");
    }
  }

  [[nodiscard]] CorrelationOptions correlation() const { return {max_lag, upsample_factor, detection_threshold}; }
};

struct StageCfo {
  std::size_t l = 0;           // observation length of the stage, samples
  double increment_hz = 0.0;   // CFO estimated at this stage
  double min_peak_magnitude = 0.0;
  bool valid = false;
};

struct SyncEstimate {
  double d_tau_hat = 0.0;      // s
  double d_epsilon_hat = 0.0;  // Hz
  double d_xi_hat = 0.0;
  std::vector<StageCfo> per_stage_cfo;
  double peak_magnitude = 0.0;  // timing correlation peak, normalized
  bool valid = false;
};

struct CfoStageResult {
  double epsilon_hz = 0.0;
  bool valid = false;
  double min_peak_magnitude = 0.0;
  std::size_t slices = 0;
  std::vector<double> unwrapped_phase;  // rad, one per slice
};

struct TauEstimate {
  double seconds = 0.0;
  double lag_samples = 0.0;
  std::ptrdiff_t coarse_lag = 0;
  double peak_magnitude = 0.0;
  bool valid = false;
};

inline double max_unambiguous_cfo(double t, double l) {
  if (!(t > 0.0) || !(l > 0.0)) throw InvalidArgument("max_unambiguous_cfo: T and L must be positive");
  return 1.0 / (t * l);
}

inline double sco_from_cfo(double epsilon_hat, double f_soo) {
  if (!(f_soo > 0.0)) throw InvalidArgument("sco_from_cfo: f_soo must be positive");
  return epsilon_hat / f_soo;
}

/// x[n] * exp(+j 2 pi eps n T): removes a CFO of eps applied by the channel model.
inline IqBuffer compensate_cfo(const IqBuffer& x, double epsilon_hat) {
  if (!std::isfinite(epsilon_hat)) throw InvalidArgument("compensate_cfo: non-finite frequency");
  if (epsilon_hat == 0.0) return x;
  std::vector<Complex> out(x.size());
  const double w = kTwoPi * epsilon_hat * x.sample_duration_t;
  constexpr std::size_t kReseed = 1024;
  for (std::size_t block = 0; block < out.size(); block += kReseed) {
    const std::size_t end = std::min(out.size(), block + kReseed);
    Complex rot = std::polar(1.0, w * static_cast<double>(block));
    const Complex step = std::polar(1.0, w);
    for (std::size_t n = block; n < end; ++n) {
      out[n] = x.samples[n] * rot;
      rot *= step;
    }
  }
  return IqBuffer(std::move(out), x.sample_duration_t);
}

namespace detail {

inline double wrap_to_pi(double a) {
  a = std::remainder(a, kTwoPi);  // [-pi, pi]
  if (a <= -std::numbers::pi) a += kTwoPi;
  return a;
}

inline void require_same_rate(const IqBuffer& x, const IqBuffer& y) {
  if (x.sample_duration_t != y.sample_duration_t) throw InvalidArgument("estimator: sample durations differ");
  if (!(x.sample_duration_t > 0.0)) throw InvalidArgument("estimator: sample duration must be positive");
}

inline double ls_slope(const std::vector<double>& t, const std::vector<double>& v) {
  const auto n = static_cast<double>(t.size());
  double mt = 0.0;
  double mv = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mt += t[i];
    mv += v[i];
  }
  mt /= n;
  mv /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sxy += (t[i] - mt) * (v[i] - mv);
    sxx += (t[i] - mt) * (t[i] - mt);
  }
  return sxy / sxx;
}

}  // namespace detail

/// Timing from one correlation window of equal-length spans.
inline TauEstimate estimate_delay(std::span<const Complex> x, std::span<const Complex> y, double t,
                                  const CorrelationOptions& opt) {
  const std::size_t max_lag = std::min(opt.max_lag, x.size() - 1);
  CrossCorrelator corr(x, y, max_lag);
  const CcfPeak peak = corr.refine_peak(opt.upsample_factor);
  TauEstimate est;
  est.coarse_lag = peak.coarse_lag;
  est.lag_samples = peak.lag;
  est.seconds = peak.lag * t;
  est.peak_magnitude = peak.peak_magnitude;
  est.valid = peak.peak_magnitude >= opt.detection_threshold;
  return est;
}

/// One CFO stage at observation length l (slices of l/2 samples). If y was
/// already multiplied by exp(-j 2 pi c n T), pass c as applied_cfo_hz: the
/// peak of slice k then sits at a lag d_k that drifts with the SCO and picks
/// up an extra phase -2 pi c d_k T, which is removed here.
inline CfoStageResult estimate_cfo_stage(const IqBuffer& x, const IqBuffer& y, std::size_t l,
                                         const CorrelationOptions& opt = {}, double applied_cfo_hz = 0.0) {
  detail::require_same_rate(x, y);
  if (l < 4 || l % 2 != 0) throw InvalidArgument("estimate_cfo_stage: observation length must be even and >= 4");
  const std::size_t slice = l / 2;
  const std::size_t n = std::min(x.size(), y.size());
  const std::size_t count = n / slice;
  if (count < 2) throw InvalidArgument("estimate_cfo_stage: signals shorter than one observation length");

  CfoStageResult r;
  r.slices = count;
  r.min_peak_magnitude = 1.0;
  std::vector<double> times(count);
  r.unwrapped_phase.resize(count);
  const std::size_t max_lag = std::min(opt.max_lag, slice - 1);
  const auto lags = static_cast<std::ptrdiff_t>(max_lag);
  // Short slices are grouped and their |R|^2 summed to pick the lag; each
  // slice then only looks around it. Blocks span at most kLagBlockSpan
  // samples so that sampling-clock drift stays well below one lag.
  const std::size_t block = std::clamp<std::size_t>(kLagBlockSpan / slice, 1, 16);
  std::vector<CrossCorrelator> corrs;
  corrs.reserve(block);
  std::vector<double> power(2 * max_lag + 1);
  for (std::size_t b0 = 0; b0 < count; b0 += block) {
    const std::size_t b1 = std::min(count, b0 + block);
    corrs.clear();
    std::fill(power.begin(), power.end(), 0.0);
    for (std::size_t k = b0; k < b1; ++k) {
      corrs.emplace_back(x.view().subspan(k * slice, slice), y.view().subspan(k * slice, slice), max_lag);
      for (std::ptrdiff_t m = -lags; m <= lags; ++m) power[static_cast<std::size_t>(m + lags)] += std::norm(corrs.back().coarse(m));
    }
    const auto best = static_cast<std::ptrdiff_t>(std::max_element(power.begin(), power.end()) - power.begin()) - lags;
    for (std::size_t k = b0; k < b1; ++k) {
      const CcfPeak peak = corrs[k - b0].refine_peak(opt.upsample_factor, best, 2);
      r.unwrapped_phase[k] = std::arg(peak.value) + kTwoPi * applied_cfo_hz * peak.lag * x.sample_duration_t;
      times[k] = static_cast<double>(k * slice) * x.sample_duration_t;
      r.min_peak_magnitude = std::min(r.min_peak_magnitude, peak.peak_magnitude);
    }
  }
  // Unwrap around the mean increment rather than around zero, so that a
  // step close to pi does not slip on self-noise; the fit is wrapped back
  // into the capture range afterwards.
  Complex resultant{};
  for (std::size_t k = 1; k < count; ++k) resultant += std::polar(1.0, r.unwrapped_phase[k] - r.unwrapped_phase[k - 1]);
  const double mean_step = std::arg(resultant);
  double previous = r.unwrapped_phase[0];
  for (std::size_t k = 1; k < count; ++k) {
    const double raw = r.unwrapped_phase[k];
    r.unwrapped_phase[k] = r.unwrapped_phase[k - 1] + mean_step + detail::wrap_to_pi(raw - previous - mean_step);
    previous = raw;
  }
  // conj(x) * y rotates as exp(+j 2 pi d_eps t) under the channel convention.
  const double lim = max_unambiguous_cfo(x.sample_duration_t, l);
  const double fit = detail::ls_slope(times, r.unwrapped_phase) / kTwoPi;
  r.epsilon_hz = fit - 2.0 * lim * std::ceil((fit - lim) / (2.0 * lim));  // into (-lim, lim]
  r.valid = r.min_peak_magnitude >= opt.detection_threshold;
  return r;
}

/// Timing over [kTimingHeadGuard, kTimingHeadGuard + l_final) of CFO- and
/// SCO-compensated channels.
inline TauEstimate estimate_tau(const IqBuffer& x, const IqBuffer& y, const EstimatorConfig& cfg) {
  detail::require_same_rate(x, y);
  const std::size_t n = std::min(x.size(), y.size());
  if (n < kTimingHeadGuard + cfg.l_final) throw InvalidArgument("estimate_tau: signals shorter than l_final");
  auto xs = x.view().subspan(kTimingHeadGuard, cfg.l_final);
  auto ys = y.view().subspan(kTimingHeadGuard, cfg.l_final);
  return estimate_delay(xs, ys, x.sample_duration_t, cfg.correlation());
}

struct SyncOutcome {
  SyncEstimate estimate;
  IqBuffer aligned_y;  // y with the estimated CFO removed and resampled by d_xi_hat
};

/// Full pipeline, also returning the compensated second channel.
inline SyncOutcome run_sync_pipeline(const IqBuffer& x, const IqBuffer& y, const EstimatorConfig& cfg,
                                     const FarrowInterpolator& farrow = default_farrow()) {
  cfg.validate();
  detail::require_same_rate(x, y);
  if (std::min(x.size(), y.size()) < 2 * cfg.l_final) {
    throw InvalidArgument("estimate_sync: buffers must cover at least 2 * l_final samples");
  }
  const CorrelationOptions opt = cfg.correlation();

  SyncOutcome out;
  SyncEstimate& est = out.estimate;
  est.valid = true;
  double total = 0.0;
  for (std::size_t l = cfg.l_start; l <= cfg.l_final; l *= 2) {
    const IqBuffer yc = compensate_cfo(y, -total);
    const CfoStageResult stage = estimate_cfo_stage(x, yc, l, opt, total);
    est.per_stage_cfo.push_back({l, stage.epsilon_hz, stage.min_peak_magnitude, stage.valid});
    if (!stage.valid) {
      est.valid = false;
      break;
    }
    total += stage.epsilon_hz;
  }
  est.d_epsilon_hat = total;
  est.d_xi_hat = sco_from_cfo(total, cfg.f_soo);

  out.aligned_y = farrow_resample(compensate_cfo(y, -total), est.d_xi_hat, farrow);
  const TauEstimate tau = estimate_tau(x, out.aligned_y, cfg);
  est.d_tau_hat = tau.seconds;
  est.peak_magnitude = tau.peak_magnitude;
  est.valid = est.valid && tau.valid;
  return out;
}

inline SyncEstimate estimate_sync(const IqBuffer& x, const IqBuffer& y, const EstimatorConfig& cfg) {
  return run_sync_pipeline(x, y, cfg).estimate;
}

}  // namespace soosync
