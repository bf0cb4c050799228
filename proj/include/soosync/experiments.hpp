#pragma once

// Monte Carlo harness: one shared SoO realization per trial is split into two
// channels, impaired by the configured differential truth, and run through the
// estimator; sample statistics per sweep point are compared to the bounds.
//
// Statistics per observation length L are pooled over up to
// max_windows_per_trial disjoint L-sample windows of every valid trial, on the
// channel pair left after the full pipeline (CFO removed, SCO resampled):
//   tau_L: timing estimate of the window;
//   eps_L: pipeline CFO plus a single CFO stage of observation length L on the
//          window (two slices of L/2), compared against MCRB(eps) at L.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "soosync/bounds.hpp"
#include "soosync/channel.hpp"
#include "soosync/estimator.hpp"
#include "soosync/random.hpp"
#include "soosync/waveform.hpp"

namespace soosync {

/// Raised when a sweep cannot produce trustworthy statistics.
class SweepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SweepAxis { ObservationLength, EsN0 };

inline std::vector<std::size_t> default_l_values() {
  std::vector<std::size_t> v;
  for (int e = 10; e <= 17; ++e) v.push_back(std::size_t{1} << e);
  return v;
}

struct SweepConfig {
  double esn0_db = 20.0;               // fixed point of the L sweep
  std::vector<double> esn0_values_db;  // points of the Es/N0 sweep
  std::vector<std::size_t> l_values = default_l_values();
  std::size_t esn0_sweep_l = std::size_t{1} << 17;  // L used by the Es/N0 sweep
  std::size_t trials = 100;
  double trial_duration_s = 1.0;
  DifferentialSync truth{100e-9, 250.0, 250.0 / 1e9};
  WaveformSpec waveform{};
  EstimatorConfig estimator = [] {
    EstimatorConfig e;
    e.f_soo = 1e9;
    return e;
  }();
  std::uint64_t master_seed = 1;
  std::size_t max_windows_per_trial = 64;
  double max_invalid_fraction = 0.05;  // applies to points at >= 10 dB
  unsigned threads = 0;                // 0: SOOSYNC_THREADS or hardware concurrency

  [[nodiscard]] std::size_t samples_per_trial() const {
    return static_cast<std::size_t>(std::llround(trial_duration_s / waveform.sample_duration_t));
  }

  void validate() const {
    waveform.validate();
    estimator.validate();
    if (trials < 2) throw InvalidArgument("sweep: need at least 2 trials");
    if (!(trial_duration_s > 0.0)) throw InvalidArgument("sweep: trial duration must be positive");
    if (l_values.empty()) throw InvalidArgument("sweep: l_values is empty");
    for (auto l : l_values) {
      if (!is_power_of_two(l) || l < 4) throw InvalidArgument("sweep: l_values must be powers of two >= 4");
    }
    if (!is_power_of_two(esn0_sweep_l) || esn0_sweep_l < 4) {
      throw InvalidArgument("sweep: esn0_sweep_l must be a power of two >= 4");
    }
    const std::size_t n = samples_per_trial();
    const std::size_t l_max = std::max(*std::max_element(l_values.begin(), l_values.end()), esn0_sweep_l);
    if (n < 2 * l_max) throw InvalidArgument("sweep: trial duration must cover 2 * max(L) samples");
    if (n < 2 * estimator.l_final) throw InvalidArgument("sweep: trial duration must cover 2 * l_final samples");
    if (max_windows_per_trial < 1) throw InvalidArgument("sweep: max_windows_per_trial must be >= 1");
    if (!std::isfinite(truth.d_tau) || !std::isfinite(truth.d_epsilon) || std::abs(truth.d_xi) >= kMaxAbsSco) {
      throw InvalidArgument("sweep: invalid truth");
    }
    if (std::isnan(esn0_db)) throw InvalidArgument("sweep: esn0_db is NaN");
    for (double v : esn0_values_db) {
      if (!std::isfinite(v)) throw InvalidArgument("sweep: Es/N0 sweep values must be finite");
    }
  }
};

struct SweepRow {
  double x = 0.0;  // L (samples) or Es/N0 (dB)
  double sigma_tau_s = 0.0;
  double sigma_eps_hz = 0.0;
  double sqrt_mcrb_tau_s = 0.0;
  double sqrt_mcrb_eps_hz = 0.0;
  double gap_tau_db = 0.0;
  double gap_eps_db = 0.0;
  std::size_t trials_used = 0;
};

struct SweepTable {
  SweepAxis axis = SweepAxis::ObservationLength;
  std::vector<SweepRow> rows;
  // metadata
  double fixed_value = 0.0;  // Es/N0 for an L sweep, L for an Es/N0 sweep
  std::size_t trials_requested = 0;
  std::vector<std::size_t> invalid_trials;  // per row
  std::vector<std::size_t> windows_used;    // per row, pooled estimates
  std::string eps_bound_alignment = "eps from two slices of L/2 compared to MCRB(eps) at L";
};

// ---------------------------------------------------------------- trials ----

struct TrialChannels {
  IqBuffer x;  // station 0
  IqBuffer y;  // station 1
};

/// Seeds: stream 0 waveform, 1 carrier phase, 2/3 channel noise.
inline TrialChannels generate_trial(const SweepConfig& cfg, std::size_t trial_index, double esn0_db) {
  const std::uint64_t t = trial_index;
  WaveformSpec ws = cfg.waveform;
  ws.num_samples = cfg.samples_per_trial() + 2 * kChannelEdgeMargin;
  ws.rng_seed = derive_seed({cfg.master_seed, t, 0});
  const IqBuffer s = generate_waveform(ws);

  Rng phase_rng(derive_seed({cfg.master_seed, t, 1}));
  std::uniform_real_distribution<double> phase(-std::numbers::pi, std::numbers::pi);

  ImpairmentSet a;
  a.tau = cfg.truth.d_tau;
  a.epsilon = cfg.truth.d_epsilon;
  a.xi = cfg.truth.d_xi;
  a.phi = phase(phase_rng);
  if (a.phi >= std::numbers::pi) a.phi = -std::numbers::pi;
  a.esn0_db = esn0_db;
  a.noise_seed = derive_seed({cfg.master_seed, t, 2});

  ImpairmentSet b;
  b.esn0_db = esn0_db;
  b.noise_seed = derive_seed({cfg.master_seed, t, 3});
  return {apply_impairments(s, a), apply_impairments(s, b)};
}

inline SyncEstimate run_trial(const SweepConfig& cfg, std::size_t trial_index, double esn0_db) {
  cfg.validate();
  const TrialChannels ch = generate_trial(cfg, trial_index, esn0_db);
  return estimate_sync(ch.x, ch.y, cfg.estimator);
}

inline SyncEstimate run_trial(const SweepConfig& cfg, std::size_t trial_index) {
  return run_trial(cfg, trial_index, cfg.esn0_db);
}

// ------------------------------------------------------------ parallelism ---

inline unsigned sweep_thread_count(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SOOSYNC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(i) for i in [0, count) on a small worker pool. Exceptions are
/// rethrown in index order after every worker finishes.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace detail {

struct WindowEstimates {
  std::vector<double> tau;
  std::vector<double> eps;
};

struct TrialOutcome {
  bool valid = false;
  std::vector<WindowEstimates> per_l;
};

// Window estimates on the compensated pair for every L in ls.
inline TrialOutcome evaluate_trial(const SweepConfig& cfg, std::size_t trial_index, double esn0_db,
                                   const std::vector<std::size_t>& ls) {
  const TrialChannels ch = generate_trial(cfg, trial_index, esn0_db);
  const SyncOutcome run = run_sync_pipeline(ch.x, ch.y, cfg.estimator);
  TrialOutcome out;
  out.valid = run.estimate.valid;
  out.per_l.resize(ls.size());
  if (!out.valid) return out;

  const CorrelationOptions opt = cfg.estimator.correlation();
  const double t = ch.x.sample_duration_t;
  // Resampling by (1 + xi_hat) scales the compensation already applied to y.
  const double residual_base = run.estimate.d_epsilon_hat * (1.0 + run.estimate.d_xi_hat);
  const std::size_t usable = std::min(ch.x.size(), run.aligned_y.size()) - kTimingHeadGuard;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const std::size_t l = ls[i];
    const std::size_t windows = std::min(cfg.max_windows_per_trial, usable / l);
    for (std::size_t w = 0; w < windows; ++w) {
      const std::size_t start = kTimingHeadGuard + w * l;
      const auto xs = ch.x.view().subspan(start, l);
      const auto ys = run.aligned_y.view().subspan(start, l);
      const TauEstimate tau = estimate_delay(xs, ys, t, opt);
      const IqBuffer xb(std::vector<Complex>(xs.begin(), xs.end()), t);
      const IqBuffer yb(std::vector<Complex>(ys.begin(), ys.end()), t);
      const CfoStageResult stage = estimate_cfo_stage(xb, yb, l, opt);
      if (!tau.valid || !stage.valid) continue;
      out.per_l[i].tau.push_back(tau.seconds);
      out.per_l[i].eps.push_back(residual_base + stage.epsilon_hz);
    }
  }
  return out;
}

inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mean = 0.0;
  for (double a : v) mean += a;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double a : v) ss += (a - mean) * (a - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline SweepRow make_row(double x, const std::vector<double>& tau, const std::vector<double>& eps,
                         const BoundQuery& q, std::size_t trials_used) {
  SweepRow r;
  r.x = x;
  r.sigma_tau_s = sample_std(tau);
  r.sigma_eps_hz = sample_std(eps);
  r.trials_used = trials_used;
  if (std::isinf(q.esn0_db)) {  // noiseless run: no bound to compare with
    r.sqrt_mcrb_tau_s = r.sqrt_mcrb_eps_hz = r.gap_tau_db = r.gap_eps_db = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  const BoundPoint b = evaluate_bounds(q);
  r.sqrt_mcrb_tau_s = b.sqrt_mcrb_tau;
  r.sqrt_mcrb_eps_hz = b.sqrt_mcrb_eps;
  r.gap_tau_db = gap_db(r.sigma_tau_s, b.mcrb_tau);
  r.gap_eps_db = gap_db(r.sigma_eps_hz, b.mcrb_eps);
  return r;
}

inline void check_point(const SweepConfig& cfg, double esn0_db, std::size_t invalid, std::size_t used,
                        const std::string& where) {
  if (used < 2) throw SweepError("sweep: fewer than 2 valid trials at " + where);
  const double fraction = static_cast<double>(invalid) / static_cast<double>(cfg.trials);
  if (esn0_db >= 10.0 && fraction > cfg.max_invalid_fraction) {
    throw SweepError("sweep: " + std::to_string(invalid) + " of " + std::to_string(cfg.trials) +
                     " trials invalid at " + where);
  }
}

}  // namespace detail

/// sigma_tau and sigma_eps against L at cfg.esn0_db.
inline SweepTable sweep_observation_length(const SweepConfig& cfg) {
  cfg.validate();
  std::vector<detail::TrialOutcome> outcomes(cfg.trials);
  parallel_for(cfg.trials, sweep_thread_count(cfg.threads), [&](std::size_t i) {
    outcomes[i] = detail::evaluate_trial(cfg, i, cfg.esn0_db, cfg.l_values);
  });

  std::size_t invalid = 0;
  for (const auto& o : outcomes) invalid += o.valid ? 0 : 1;

  SweepTable table;
  table.axis = SweepAxis::ObservationLength;
  table.fixed_value = cfg.esn0_db;
  table.trials_requested = cfg.trials;
  for (std::size_t i = 0; i < cfg.l_values.size(); ++i) {
    std::vector<double> tau;
    std::vector<double> eps;
    std::size_t used = 0;
    for (const auto& o : outcomes) {  // trial-index order
      if (!o.valid || o.per_l[i].tau.empty()) continue;
      ++used;
      tau.insert(tau.end(), o.per_l[i].tau.begin(), o.per_l[i].tau.end());
      eps.insert(eps.end(), o.per_l[i].eps.begin(), o.per_l[i].eps.end());
    }
    const auto l = static_cast<double>(cfg.l_values[i]);
    detail::check_point(cfg, cfg.esn0_db, invalid, used, "L=" + std::to_string(cfg.l_values[i]));
    const BoundQuery q{l, cfg.waveform.sample_duration_t, cfg.waveform.bandwidth_b, cfg.esn0_db};
    table.rows.push_back(detail::make_row(l, tau, eps, q, used));
    table.invalid_trials.push_back(invalid);
    table.windows_used.push_back(tau.size());
  }
  return table;
}

/// sigma_tau and sigma_eps against Es/N0 at L = cfg.esn0_sweep_l.
inline SweepTable sweep_esn0(const SweepConfig& cfg) {
  cfg.validate();
  if (cfg.esn0_values_db.empty()) throw InvalidArgument("sweep_esn0: no Es/N0 values given");
  const std::vector<std::size_t> ls{cfg.esn0_sweep_l};
  const std::size_t points = cfg.esn0_values_db.size();
  std::vector<detail::TrialOutcome> outcomes(cfg.trials * points);
  parallel_for(outcomes.size(), sweep_thread_count(cfg.threads), [&](std::size_t k) {
    const std::size_t p = k / cfg.trials;
    outcomes[k] = detail::evaluate_trial(cfg, k % cfg.trials, cfg.esn0_values_db[p], ls);
  });

  SweepTable table;
  table.axis = SweepAxis::EsN0;
  table.fixed_value = static_cast<double>(cfg.esn0_sweep_l);
  table.trials_requested = cfg.trials;
  for (std::size_t p = 0; p < points; ++p) {
    std::vector<double> tau;
    std::vector<double> eps;
    std::size_t used = 0;
    std::size_t invalid = 0;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      const auto& o = outcomes[p * cfg.trials + t];
      if (!o.valid) ++invalid;
      if (!o.valid || o.per_l[0].tau.empty()) continue;
      ++used;
      tau.insert(tau.end(), o.per_l[0].tau.begin(), o.per_l[0].tau.end());
      eps.insert(eps.end(), o.per_l[0].eps.begin(), o.per_l[0].eps.end());
    }
    const double db = cfg.esn0_values_db[p];
    char where[64];
    std::snprintf(where, sizeof where, "Es/N0=%g dB", db);
    detail::check_point(cfg, db, invalid, used, where);
    const BoundQuery q{static_cast<double>(cfg.esn0_sweep_l), cfg.waveform.sample_duration_t,
                       cfg.waveform.bandwidth_b, db};
    table.rows.push_back(detail::make_row(db, tau, eps, q, used));
    table.invalid_trials.push_back(invalid);
    table.windows_used.push_back(tau.size());
  }
  return table;
}

/// Least-squares slope of log10(y) against log10(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("loglog_slope: need two or more points");
  std::vector<double> lx(x.size());
  std::vector<double> ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidArgument("loglog_slope: values must be positive");
    lx[i] = std::log10(x[i]);
    ly[i] = std::log10(y[i]);
  }
  return detail::ls_slope(lx, ly);
}

// ------------------------------------------------------------------- CSV ----

inline constexpr const char* kSweepCsvHeader =
    "x,sigma_tau_s,sigma_eps_hz,sqrt_mcrb_tau_s,sqrt_mcrb_eps_hz,gap_tau_db,gap_eps_db,trials_used";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string sweep_csv_string(const SweepTable& table) {
  std::string s = kSweepCsvHeader;
  s += '\n';
  for (const auto& r : table.rows) {
    for (double v : {r.x, r.sigma_tau_s, r.sigma_eps_hz, r.sqrt_mcrb_tau_s, r.sqrt_mcrb_eps_hz, r.gap_tau_db,
                     r.gap_eps_db}) {
      s += format_double(v);
      s += ',';
    }
    s += std::to_string(r.trials_used);
    s += '\n';
  }
  return s;
}

inline void write_sweep_csv(const SweepTable& table, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_sweep_csv: cannot open '" + path + "' for writing");
  const std::string s = sweep_csv_string(table);
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  f.flush();
  if (!f) throw std::runtime_error("write_sweep_csv: write to '" + path + "' failed");
}

/// Rows only; metadata is not part of the CSV.
inline SweepTable read_sweep_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_sweep_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line) || line != kSweepCsvHeader) {
    throw std::runtime_error("read_sweep_csv: '" + path + "' has an unexpected header");
  }
  SweepTable table;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    const std::string where = path + ":" + std::to_string(lineno);
    if (cells.size() != 8) throw std::runtime_error("read_sweep_csv: " + where + ": expected 8 fields");
    double v[7];
    for (int k = 0; k < 7; ++k) {
      const auto& c = cells[static_cast<std::size_t>(k)];
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v[k]);
      if (res.ec != std::errc{} || res.ptr != c.data() + c.size()) {
        // from_chars does not accept the "nan"/"inf" spellings of every libc
        char* end = nullptr;
        v[k] = std::strtod(c.c_str(), &end);
        if (end != c.c_str() + c.size()) throw std::runtime_error("read_sweep_csv: " + where + ": bad number '" + c + "'");
      }
    }
    std::size_t used = 0;
    const auto& c = cells[7];
    const auto res = std::from_chars(c.data(), c.data() + c.size(), used);
    if (res.ec != std::errc{} || res.ptr != c.data() + c.size()) {
      throw std::runtime_error("read_sweep_csv: " + where + ": bad trial count '" + c + "'");
    }
    table.rows.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], used});
  }
  return table;
}

}  // namespace soosync
