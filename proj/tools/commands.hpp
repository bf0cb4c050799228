#pragma once

// soosync command line: bounds, simulate, estimate, sweep.
// Exit status: 0 ok, 1 usage or configuration error, 2 estimation failure
// (including unreadable inputs and sample-rate mismatch).

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "soosync/soosync.hpp"

namespace soosync::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitEstimation = 2;

inline constexpr const char* kBoundsCsvHeader =
    "l,t_s,b_hz,esn0_db,mcrb_tau_s2,mcrb_eps_hz2,sqrt_mcrb_tau_s,sqrt_mcrb_eps_hz";
inline constexpr const char* kEstimateCsvHeader = "d_tau_s,d_eps_hz,d_xi,peak_mag,valid";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string g17(double v) { return format_double(v); }

inline WaveformKind parse_kind(const std::string& s) {
  if (s == "rect") return WaveformKind::RectNoise;
  if (s == "ofdm") return WaveformKind::Ofdm;
  throw UsageError("unknown waveform '" + s + "' (expected rect or ofdm)");
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError(std::string("config: field '") + key + "' has the wrong type");
  }
}

inline void apply_config(const nlohmann::json& j, SweepConfig& cfg, std::string& axis) {
  if (!j.is_object()) throw UsageError("config: top level must be an object");
  take(j, "axis", axis);
  take(j, "esn0_db", cfg.esn0_db);
  take(j, "esn0_values_db", cfg.esn0_values_db);
  take(j, "l_values", cfg.l_values);
  take(j, "esn0_sweep_l", cfg.esn0_sweep_l);
  take(j, "trials", cfg.trials);
  take(j, "trial_duration_s", cfg.trial_duration_s);
  take(j, "master_seed", cfg.master_seed);
  take(j, "max_windows_per_trial", cfg.max_windows_per_trial);
  take(j, "threads", cfg.threads);
  if (j.contains("truth")) {
    const auto& t = j.at("truth");
    take(t, "d_tau_s", cfg.truth.d_tau);
    take(t, "d_eps_hz", cfg.truth.d_epsilon);
    take(t, "d_xi", cfg.truth.d_xi);
  }
  if (j.contains("waveform")) {
    const auto& w = j.at("waveform");
    std::string kind;
    take(w, "kind", kind);
    if (!kind.empty()) cfg.waveform.kind = parse_kind(kind);
    take(w, "sample_duration_t", cfg.waveform.sample_duration_t);
    take(w, "bandwidth_b", cfg.waveform.bandwidth_b);
    take(w, "ofdm_fft_size", cfg.waveform.ofdm_fft_size);
    take(w, "ofdm_active_carriers", cfg.waveform.ofdm_active_carriers);
    take(w, "ofdm_guard_samples", cfg.waveform.ofdm_guard_samples);
  }
  if (j.contains("estimator")) {
    const auto& e = j.at("estimator");
    take(e, "l_start", cfg.estimator.l_start);
    take(e, "l_final", cfg.estimator.l_final);
    take(e, "upsample_factor", cfg.estimator.upsample_factor);
    take(e, "f_soo", cfg.estimator.f_soo);
    take(e, "max_lag", cfg.estimator.max_lag);
    take(e, "detection_threshold", cfg.estimator.detection_threshold);
  }
}

inline nlohmann::json sweep_metadata(const SweepConfig& cfg, const SweepTable& t) {
  return {
      {"axis", t.axis == SweepAxis::ObservationLength ? "l" : "esn0"},
      {"fixed_value", t.fixed_value},
      {"trials_requested", t.trials_requested},
      {"invalid_trials", t.invalid_trials},
      {"windows_used", t.windows_used},
      {"eps_bound_alignment", t.eps_bound_alignment},
      {"master_seed", cfg.master_seed},
      {"truth", {{"d_tau_s", cfg.truth.d_tau}, {"d_eps_hz", cfg.truth.d_epsilon}, {"d_xi", cfg.truth.d_xi}}},
  };
}

}  // namespace detail

inline int cmd_bounds(const std::vector<double>& ls, const std::vector<double>& ts, const std::vector<double>& bs,
                      const std::vector<double>& esn0s, const std::string& out_path, std::ostream& out) {
  std::ostringstream csv;
  csv << kBoundsCsvHeader << '\n';
  for (double l : ls) {
    for (double t : ts) {
      for (double b : bs) {
        for (double db : esn0s) {
          const BoundQuery q{l, t, b, db};
          q.validate();
          const BoundPoint p = evaluate_bounds(q);
          csv << detail::g17(l) << ',' << detail::g17(t) << ',' << detail::g17(b) << ',' << detail::g17(db) << ','
              << detail::g17(p.mcrb_tau) << ',' << detail::g17(p.mcrb_eps) << ',' << detail::g17(p.sqrt_mcrb_tau)
              << ',' << detail::g17(p.sqrt_mcrb_eps) << '\n';
        }
      }
    }
  }
  if (out_path.empty()) {
    out << csv.str();
  } else {
    std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
    f << csv.str();
    if (!f) throw std::runtime_error("cannot write '" + out_path + "'");
  }
  return kExitOk;
}

/// Runs the command line; returns the exit status.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synchronisation from signals of opportunity: bounds, simulation, estimation, sweeps"};
  app.require_subcommand(1);

  // bounds
  auto* bounds = app.add_subcommand("bounds", "Tabulate timing and frequency bounds as CSV");
  std::vector<double> b_l;
  std::vector<double> b_t;
  std::vector<double> b_b;
  std::vector<double> b_db;
  std::string b_out;
  bounds->add_option("--l", b_l, "Observation length(s), samples")->required()->delimiter(',');
  bounds->add_option("--t", b_t, "Sample duration(s), s")->required()->delimiter(',');
  bounds->add_option("--b", b_b, "Bandwidth(s), Hz")->required()->delimiter(',');
  bounds->add_option("--esn0-db", b_db, "Es/N0 value(s), dB")->required()->delimiter(',');
  bounds->add_option("--out", b_out, "CSV output path (default stdout)");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Write a two-channel simulated capture");
  std::string s_out0;
  std::string s_out1;
  std::string s_truth;
  std::string s_kind = "rect";
  double s_t = WaveformSpec{}.sample_duration_t;
  double s_b = WaveformSpec{}.bandwidth_b;
  std::size_t s_samples = std::size_t{1} << 21;
  std::uint64_t s_seed = 1;
  double s_esn0 = std::numeric_limits<double>::infinity();
  double s_fc = 0.0;
  ImpairmentSet s_imp[2];
  simulate->add_option("--out0", s_out0, "Station 0 IQ file (cf32le)")->required();
  simulate->add_option("--out1", s_out1, "Station 1 IQ file (cf32le)")->required();
  simulate->add_option("--truth", s_truth, "Truth JSON path (default <out0 stem>.truth.json)");
  simulate->add_option("--waveform", s_kind, "rect or ofdm");
  simulate->add_option("--t", s_t, "Sample duration, s");
  simulate->add_option("--b", s_b, "Bandwidth of the rect waveform, Hz");
  simulate->add_option("--samples", s_samples, "Samples per output file");
  simulate->add_option("--seed", s_seed, "Master seed");
  simulate->add_option("--esn0-db", s_esn0, "Es/N0 per channel, dB (default noiseless)");
  simulate->add_option("--center-frequency", s_fc, "Centre frequency written to the sidecars, Hz");
  for (int c = 0; c < 2; ++c) {
    const std::string k = std::to_string(c);
    simulate->add_option("--tau" + k, s_imp[c].tau, "Timing offset of station " + k + ", s");
    simulate->add_option("--eps" + k, s_imp[c].epsilon, "CFO of station " + k + ", Hz");
    simulate->add_option("--xi" + k, s_imp[c].xi, "SCO of station " + k);
    simulate->add_option("--phi" + k, s_imp[c].phi, "Carrier phase of station " + k + ", rad");
  }

  // estimate
  auto* estimate = app.add_subcommand("estimate", "Estimate differential sync parameters from two IQ files");
  std::string e_x;
  std::string e_y;
  EstimatorConfig e_cfg;
  estimate->add_option("x", e_x, "Station 0 IQ file")->required();
  estimate->add_option("y", e_y, "Station 1 IQ file")->required();
  estimate->add_option("--f-soo", e_cfg.f_soo, "SoO carrier frequency, Hz")->required();
  estimate->add_option("--l-start", e_cfg.l_start, "First CFO stage observation length");
  estimate->add_option("--l-final", e_cfg.l_final, "Last CFO stage and timing observation length");
  estimate->add_option("--upsample", e_cfg.upsample_factor, "Peak refinement factor");
  estimate->add_option("--max-lag", e_cfg.max_lag, "Correlation search range, samples");
  estimate->add_option("--threshold", e_cfg.detection_threshold, "Minimum normalized peak magnitude");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep against the bounds");
  std::string w_config;
  std::string w_out;
  std::string w_meta;
  std::string w_axis = "l";
  SweepConfig w_cfg;
  std::optional<std::size_t> w_trials;
  std::optional<std::uint64_t> w_seed;
  std::optional<double> w_esn0;
  std::vector<double> w_esn0_list;
  std::vector<std::size_t> w_l_values;
  std::optional<double> w_f_soo;
  std::optional<double> w_d_tau;
  std::optional<double> w_d_eps;
  std::optional<double> w_d_xi;
  std::optional<unsigned> w_threads;
  sweep->add_option("--config", w_config, "JSON sweep configuration");
  sweep->add_option("--out", w_out, "CSV output path")->required();
  sweep->add_option("--meta", w_meta, "Optional JSON path for table metadata");
  sweep->add_option("--axis", w_axis, "l or esn0");
  sweep->add_option("--trials", w_trials, "Number of trials");
  sweep->add_option("--seed", w_seed, "Master seed");
  sweep->add_option("--esn0-db", w_esn0, "Es/N0 of the L sweep, dB");
  sweep->add_option("--esn0-list", w_esn0_list, "Es/N0 points of the Es/N0 sweep, dB")->delimiter(',');
  sweep->add_option("--l-values", w_l_values, "Observation lengths of the L sweep")->delimiter(',');
  sweep->add_option("--f-soo", w_f_soo, "SoO carrier frequency, Hz");
  sweep->add_option("--d-tau", w_d_tau, "True differential timing offset, s");
  sweep->add_option("--d-eps", w_d_eps, "True differential CFO, Hz (SCO follows as d_eps / f_soo)");
  sweep->add_option("--d-xi", w_d_xi, "True differential SCO, overrides the coupled value");
  sweep->add_option("--threads", w_threads, "Worker threads (default SOOSYNC_THREADS or all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (bounds->parsed()) return cmd_bounds(b_l, b_t, b_b, b_db, b_out, out);

    if (simulate->parsed()) {
      WaveformSpec ws;
      ws.kind = detail::parse_kind(s_kind);
      ws.sample_duration_t = s_t;
      ws.bandwidth_b = s_b;
      ws.num_samples = s_samples + 2 * kChannelEdgeMargin;
      ws.rng_seed = derive_seed({s_seed, 0});
      ws.validate();
      for (int c = 0; c < 2; ++c) {
        s_imp[c].esn0_db = s_esn0;
        s_imp[c].noise_seed = derive_seed({s_seed, static_cast<std::uint64_t>(c) + 1});
        s_imp[c].validate();
      }
      const IqBuffer s = generate_waveform(ws);
      const IqBuffer ch0 = apply_impairments(s, s_imp[0]);
      const IqBuffer ch1 = apply_impairments(s, s_imp[1]);
      write_iq_file(s_out0, ch0, s_fc);
      write_iq_file(s_out1, ch1, s_fc);
      std::string truth_path = s_truth;
      if (truth_path.empty()) truth_path = std::filesystem::path(s_out0).replace_extension(".truth.json").string();
      write_truth_json(truth_path, differential(s_imp[0], s_imp[1]));
      out << "wrote " << s_out0 << ", " << s_out1 << " (" << ch0.size() << " samples each), truth " << truth_path
          << '\n';
      return kExitOk;
    }

    if (estimate->parsed()) {
      e_cfg.validate();
      IqRecording x;
      IqRecording y;
      try {
        x = read_iq_file(e_x);
        y = read_iq_file(e_y);
      } catch (const IqFileError& e) {
        err << "estimate: " << e.what() << '\n';
        return kExitEstimation;
      }
      if (x.meta.sample_rate_hz != y.meta.sample_rate_hz) {
        err << "estimate: sample rates differ (" << detail::g17(x.meta.sample_rate_hz) << " Hz vs "
            << detail::g17(y.meta.sample_rate_hz) << " Hz)\n";
        return kExitEstimation;
      }
      SyncEstimate est;
      try {
        est = estimate_sync(x.buffer, y.buffer, e_cfg);
      } catch (const InvalidArgument& e) {
        err << "estimate: " << e.what() << '\n';
        return kExitEstimation;
      }
      out << kEstimateCsvHeader << '\n'
          << detail::g17(est.d_tau_hat) << ',' << detail::g17(est.d_epsilon_hat) << ',' << detail::g17(est.d_xi_hat)
          << ',' << detail::g17(est.peak_magnitude) << ',' << (est.valid ? 1 : 0) << '\n';
      if (!est.valid) {
        err << "estimate: no reliable correlation peak\n";
        return kExitEstimation;
      }
      return kExitOk;
    }

    if (sweep->parsed()) {
      if (!w_config.empty()) {
        std::ifstream f(w_config);
        if (!f) throw UsageError("cannot open config '" + w_config + "'");
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(f);
        } catch (const nlohmann::json::exception& e) {
          throw UsageError("config '" + w_config + "': " + e.what());
        }
        std::string config_axis = w_axis;
        detail::apply_config(j, w_cfg, config_axis);
        if (sweep->count("--axis") == 0) w_axis = config_axis;
      }
      if (w_trials) w_cfg.trials = *w_trials;
      if (w_seed) w_cfg.master_seed = *w_seed;
      if (w_esn0) w_cfg.esn0_db = *w_esn0;
      if (!w_esn0_list.empty()) w_cfg.esn0_values_db = w_esn0_list;
      if (!w_l_values.empty()) w_cfg.l_values = w_l_values;
      if (w_f_soo) w_cfg.estimator.f_soo = *w_f_soo;
      if (w_d_tau) w_cfg.truth.d_tau = *w_d_tau;
      if (w_d_eps || w_f_soo) {
        if (w_d_eps) w_cfg.truth.d_epsilon = *w_d_eps;
        w_cfg.truth.d_xi = w_cfg.truth.d_epsilon / w_cfg.estimator.f_soo;
      }
      if (w_d_xi) w_cfg.truth.d_xi = *w_d_xi;
      if (w_threads) w_cfg.threads = *w_threads;
      if (w_axis != "l" && w_axis != "esn0") throw UsageError("--axis must be l or esn0");
      if (w_axis == "esn0" && w_cfg.esn0_values_db.empty()) throw UsageError("--axis esn0 needs --esn0-list");
      w_cfg.validate();

      SweepTable table;
      try {
        table = w_axis == "l" ? sweep_observation_length(w_cfg) : sweep_esn0(w_cfg);
      } catch (const SweepError& e) {
        err << e.what() << '\n';
        return kExitEstimation;
      }
      write_sweep_csv(table, w_out);
      if (!w_meta.empty()) {
        std::ofstream f(w_meta, std::ios::binary | std::ios::trunc);
        f << detail::sweep_metadata(w_cfg, table).dump(2) << '\n';
        if (!f) throw std::runtime_error("cannot write '" + w_meta + "'");
      }
      out << "wrote " << table.rows.size() << " rows to " << w_out << '\n';
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitEstimation;
  }
  return kExitUsage;
}

}  // namespace soosync::cli
