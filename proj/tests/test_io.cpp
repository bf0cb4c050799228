#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "soosync/iq_file.hpp"

using namespace soosync;
namespace fs = std::filesystem;

namespace {

class IqFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("soosync_io_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path path(const std::string& name) const { return dir_ / name; }

  fs::path dir_;
};

IqBuffer sample_buffer() {
  std::vector<Complex> v;
  for (int n = 0; n < 100; ++n) v.emplace_back(0.01f * static_cast<float>(n), -0.5f + 0.003f * static_cast<float>(n));
  return IqBuffer(std::move(v), 1.0 / 2097152.0);
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << s;
}

}  // namespace

TEST_F(IqFiles, RoundTrip) {
  const IqBuffer x = sample_buffer();
  write_iq_file(path("a.cf32"), x, 1.5e9);
  EXPECT_TRUE(fs::exists(path("a.json")));
  EXPECT_EQ(fs::file_size(path("a.cf32")), 800u);
  const IqRecording r = read_iq_file(path("a.cf32"));
  EXPECT_EQ(r.meta.num_samples, 100u);
  EXPECT_EQ(r.meta.sample_rate_hz, 2097152.0);
  EXPECT_EQ(r.meta.center_frequency_hz, 1.5e9);
  EXPECT_EQ(r.meta.format_tag, "cf32le");
  EXPECT_EQ(r.buffer.sample_duration_t, x.sample_duration_t);
  // Values chosen to be exact in float.
  EXPECT_EQ(r.buffer.samples, x.samples);
}

TEST_F(IqFiles, LittleEndianInterleavedLayout) {
  write_iq_file(path("b.iq"), IqBuffer(std::vector<Complex>{{1.0, -2.0}}, 0.5));
  std::ifstream f(path("b.iq"), std::ios::binary);
  unsigned char bytes[8];
  f.read(reinterpret_cast<char*>(bytes), 8);
  // 1.0f = 0x3f800000, -2.0f = 0xc0000000
  const unsigned char want[8] = {0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
  EXPECT_EQ(std::memcmp(bytes, want, 8), 0);
  EXPECT_EQ(read_iq_metadata(path("b.iq")).sample_rate_hz, 2.0);
}

TEST_F(IqFiles, EmptyRecording) {
  write_iq_file(path("e.cf32"), IqBuffer(std::vector<Complex>{}, 1e-6));
  EXPECT_EQ(read_iq_file(path("e.cf32")).buffer.size(), 0u);
}

TEST_F(IqFiles, MissingSidecar) {
  write_iq_file(path("c.cf32"), sample_buffer());
  fs::remove(path("c.json"));
  EXPECT_THROW(read_iq_file(path("c.cf32")), IqFileError);
}

TEST_F(IqFiles, SizeMismatch) {
  write_iq_file(path("d.cf32"), sample_buffer());
  fs::resize_file(path("d.cf32"), 796);
  try {
    read_iq_file(path("d.cf32"));
    FAIL();
  } catch (const IqFileError& e) {
    EXPECT_NE(std::string(e.what()).find("796"), std::string::npos) << e.what();
  }
}

TEST_F(IqFiles, BadSidecars) {
  write_iq_file(path("s.cf32"), sample_buffer());
  write_text(path("s.json"), R"({"sample_rate_hz": 1e6, "center_frequency_hz": 0, "format_tag": "ci16", "num_samples": 100})");
  EXPECT_THROW(read_iq_file(path("s.cf32")), IqFileError);
  write_text(path("s.json"), R"({"sample_rate_hz": 1e6, "format_tag": "cf32le", "num_samples": 100})");
  EXPECT_THROW(read_iq_file(path("s.cf32")), IqFileError);
  write_text(path("s.json"), R"({"sample_rate_hz": -1, "center_frequency_hz": 0, "format_tag": "cf32le", "num_samples": 100})");
  EXPECT_THROW(read_iq_file(path("s.cf32")), IqFileError);
  write_text(path("s.json"), R"({"sample_rate_hz": "fast", "center_frequency_hz": 0, "format_tag": "cf32le", "num_samples": 100})");
  EXPECT_THROW(read_iq_file(path("s.cf32")), IqFileError);
  write_text(path("s.json"), "{not json");
  EXPECT_THROW(read_iq_file(path("s.cf32")), IqFileError);
}

TEST_F(IqFiles, NonFiniteSampleRejected) {
  IqBuffer x = sample_buffer();
  x.samples[42] = Complex(0.0, std::numeric_limits<double>::infinity());
  write_iq_file(path("n.cf32"), x);
  EXPECT_THROW(read_iq_file(path("n.cf32")), IqFileError);
}

TEST_F(IqFiles, SidecarNaming) {
  EXPECT_EQ(iq_sidecar_path("dir/rec.cf32"), fs::path("dir/rec.json"));
  EXPECT_EQ(iq_sidecar_path("rec"), fs::path("rec.json"));
  EXPECT_THROW(iq_sidecar_path("rec.json"), IqFileError);
}

TEST_F(IqFiles, TruthRoundTrip) {
  const DifferentialSync t{100e-9, 1500.0, 1.5e-6};
  write_truth_json(path("t.json"), t);
  EXPECT_EQ(read_truth_json(path("t.json")), t);
  write_text(path("u.json"), R"({"d_tau_s": 1e-9, "d_eps_hz": 2})");
  EXPECT_THROW(read_truth_json(path("u.json")), IqFileError);
}
