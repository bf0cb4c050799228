#pragma once

// Raw IQ recordings: interleaved float32 I/Q, little endian ("cf32le"), with a
// JSON sidecar next to the data file (same stem, .json extension):
//
//   {"sample_rate_hz": 2097152.0, "center_frequency_hz": 1.0e9,
//    "format_tag": "cf32le", "num_samples": 2097152}

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "soosync/channel.hpp"
#include "soosync/types.hpp"

namespace soosync {

class IqFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kIqFormatTag = "cf32le";

struct IqMetadata {
  double sample_rate_hz = 0.0;
  double center_frequency_hz = 0.0;
  std::string format_tag = kIqFormatTag;
  std::size_t num_samples = 0;
};

struct IqRecording {
  IqBuffer buffer;
  IqMetadata meta;
};

inline std::filesystem::path iq_sidecar_path(const std::filesystem::path& data) {
  if (data.extension() == ".json") throw IqFileError("iq: data file '" + data.string() + "' must not end in .json");
  return std::filesystem::path(data).replace_extension(".json");
}

namespace detail {

inline std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IqFileError("cannot open '" + path.string() + "' for writing");
  f << j.dump(2) << '\n';
  if (!f) throw IqFileError("write to '" + path.string() + "' failed");
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IqFileError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw IqFileError("'" + path.string() + "': malformed JSON (" + e.what() + ")");
  }
}

template <typename T>
T json_field(const nlohmann::json& j, const char* key, const std::filesystem::path& path) {
  if (!j.is_object() || !j.contains(key)) throw IqFileError("'" + path.string() + "': missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw IqFileError("'" + path.string() + "': field '" + key + "' has the wrong type");
  }
}

}  // namespace detail

inline void write_iq_file(const std::filesystem::path& path, const IqBuffer& x, double center_frequency_hz = 0.0) {
  if (!(x.sample_duration_t > 0.0)) throw InvalidArgument("write_iq_file: sample duration must be positive");
  std::vector<std::uint32_t> raw(2 * x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    const auto re = static_cast<float>(x.samples[n].real());
    const auto im = static_cast<float>(x.samples[n].imag());
    raw[2 * n] = detail::to_le(std::bit_cast<std::uint32_t>(re));
    raw[2 * n + 1] = detail::to_le(std::bit_cast<std::uint32_t>(im));
  }
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IqFileError("cannot open '" + path.string() + "' for writing");
    f.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
    if (!f) throw IqFileError("write to '" + path.string() + "' failed");
  }
  nlohmann::json meta = {
      {"sample_rate_hz", 1.0 / x.sample_duration_t},
      {"center_frequency_hz", center_frequency_hz},
      {"format_tag", kIqFormatTag},
      {"num_samples", x.size()},
  };
  detail::write_json(iq_sidecar_path(path), meta);
}

inline IqMetadata read_iq_metadata(const std::filesystem::path& data) {
  const auto side = iq_sidecar_path(data);
  const nlohmann::json j = detail::read_json(side);
  IqMetadata m;
  m.sample_rate_hz = detail::json_field<double>(j, "sample_rate_hz", side);
  m.center_frequency_hz = detail::json_field<double>(j, "center_frequency_hz", side);
  m.format_tag = detail::json_field<std::string>(j, "format_tag", side);
  m.num_samples = detail::json_field<std::size_t>(j, "num_samples", side);
  if (m.format_tag != kIqFormatTag) {
    throw IqFileError("'" + side.string() + "': unsupported format_tag '" + m.format_tag + "'");
  }
  if (!(m.sample_rate_hz > 0.0) || !std::isfinite(m.sample_rate_hz)) {
    throw IqFileError("'" + side.string() + "': sample_rate_hz must be positive");
  }
  return m;
}

inline IqRecording read_iq_file(const std::filesystem::path& path) {
  IqRecording rec;
  rec.meta = read_iq_metadata(path);
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(path, ec);
  if (ec) throw IqFileError("cannot read '" + path.string() + "': " + ec.message());
  if (bytes != rec.meta.num_samples * 8) {
    throw IqFileError("'" + path.string() + "': size " + std::to_string(bytes) + " bytes does not match " +
                      std::to_string(rec.meta.num_samples) + " cf32 samples");
  }
  std::vector<std::uint32_t> raw(2 * rec.meta.num_samples);
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IqFileError("cannot open '" + path.string() + "'");
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
  if (!f) throw IqFileError("short read from '" + path.string() + "'");

  std::vector<Complex> s(rec.meta.num_samples);
  for (std::size_t n = 0; n < s.size(); ++n) {
    const float re = std::bit_cast<float>(detail::to_le(raw[2 * n]));
    const float im = std::bit_cast<float>(detail::to_le(raw[2 * n + 1]));
    if (!std::isfinite(re) || !std::isfinite(im)) {
      throw IqFileError("'" + path.string() + "': non-finite sample at index " + std::to_string(n));
    }
    s[n] = Complex(re, im);
  }
  rec.buffer = IqBuffer(std::move(s), 1.0 / rec.meta.sample_rate_hz);
  return rec;
}

/// Ground truth written next to simulated recordings.
inline void write_truth_json(const std::filesystem::path& path, const DifferentialSync& truth) {
  detail::write_json(path, {{"d_tau_s", truth.d_tau}, {"d_eps_hz", truth.d_epsilon}, {"d_xi", truth.d_xi}});
}

inline DifferentialSync read_truth_json(const std::filesystem::path& path) {
  const nlohmann::json j = detail::read_json(path);
  return {detail::json_field<double>(j, "d_tau_s", path), detail::json_field<double>(j, "d_eps_hz", path),
          detail::json_field<double>(j, "d_xi", path)};
}

}  // namespace soosync
