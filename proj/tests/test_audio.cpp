#include "doctest.h"

#include "dpss/audio.hpp"
#include "dpss/common.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>

using namespace dpss;

namespace {

std::filesystem::path temp(const char* name) { return std::filesystem::temp_directory_path() / name; }

std::vector<char> bytes_of(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("16-bit PCM round trips bit exactly") {
  Waveform w;
  w.sample_rate = 22050;
  for (int v = -32768; v < 32768; v += 7) w.samples.push_back(v / 32768.0);
  const auto path = temp("dpss_pcm16.wav");
  write_wav(path, w, SampleFormat::pcm16);
  const auto r = read_wav(path);
  CHECK(r.sample_rate == 22050);
  CHECK(r.samples == w.samples);
  const auto first = bytes_of(path);
  write_wav(path, r, SampleFormat::pcm16);
  CHECK(bytes_of(path) == first);
  std::filesystem::remove(path);
}

TEST_CASE("32-bit float round trips bit exactly") {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g(0.0f, 0.3f);
  Waveform w;
  for (int i = 0; i < 5000; ++i) w.samples.push_back(static_cast<double>(g(rng)));
  const auto path = temp("dpss_f32.wav");
  write_wav(path, w, SampleFormat::float32);
  CHECK(read_wav(path).samples == w.samples);
  std::filesystem::remove(path);
}

TEST_CASE("PCM quantization clamps and rounds") {
  Waveform w;
  w.samples = {2.0, -2.0, 0.25, 1.0 / 65536.0 * 0.9};
  const auto path = temp("dpss_clamp.wav");
  write_wav(path, w, SampleFormat::pcm16);
  const auto r = read_wav(path);
  CHECK(r.samples[0] == 32767.0 / 32768.0);
  CHECK(r.samples[1] == -1.0);
  CHECK(r.samples[2] == 0.25);
  CHECK(r.samples[3] == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("levels") {
  const std::vector<double> x(100, 0.5);
  CHECK(mean_power(x) == doctest::Approx(0.25));
  CHECK(rms_dbfs(x) == doctest::Approx(10.0 * std::log10(0.25)));
}

TEST_CASE("audio errors") {
  CHECK_THROWS_AS(read_wav("/nonexistent.wav"), Error);
  const auto path = temp("dpss_garbage.wav");
  {
    std::ofstream out(path, std::ios::binary);
    out << "RIFF0000WAVEjunk";
  }
  CHECK_THROWS_AS(read_wav(path), Error);
  std::filesystem::remove(path);
  Waveform empty;
  CHECK_THROWS_AS(validate(empty), Error);
  Waveform bad;
  bad.samples = {0.0, std::nan("")};
  CHECK_THROWS_AS(validate(bad), Error);
  CHECK_THROWS_AS(write_wav("/nonexistent/dir/x.wav", Waveform{{0.1}, 16000}, SampleFormat::pcm16), Error);
}
