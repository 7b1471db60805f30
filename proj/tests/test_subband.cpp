#include "doctest.h"
#include "test_signals.hpp"

#include "dpss/subband.hpp"

#include <chrono>
#include <cmath>

using namespace dpss;
using namespace dpss::subband;
using namespace dpss::testing;

namespace {

const FilterBank& bank64() {
  static const FilterBank bank(64, 10);
  return bank;
}

double round_trip_snr(const FilterBank& bank, const Waveform& w) {
  const Waveform y = bank.synthesize(bank.analyze(w), w.sample_rate);
  REQUIRE(y.size() == w.size());
  return snr_db(w.samples, y.samples);
}

}  // namespace

TEST_CASE("design_prototype length and determinism") {
  const auto a = design_prototype(64, 10);
  const auto b = design_prototype(64, 10);
  CHECK(a.taps.size() == 640);
  CHECK(a.taps == b.taps);
  for (std::size_t n = 0; n < a.taps.size(); ++n) CHECK(a.taps[n] == a.taps[a.taps.size() - 1 - n]);
}

TEST_CASE("design_prototype rejects unsupported geometry") {
  CHECK_THROWS_AS(design_prototype(48, 10), Error);
  CHECK_THROWS_AS(design_prototype(128, 10), Error);
  CHECK_THROWS_AS(design_prototype(64, 6), Error);
  CHECK_THROWS_AS(design_prototype(64, 9), Error);
}

TEST_CASE("prototype is a lowpass with its half-power point near pi/(2C)") {
  const auto p = design_prototype(16, 10);
  auto response = [&](double w) {
    double re = 0.0, im = 0.0;
    for (std::size_t n = 0; n < p.taps.size(); ++n) {
      re += p.taps[n] * std::cos(w * static_cast<double>(n));
      im -= p.taps[n] * std::sin(w * static_cast<double>(n));
    }
    return re * re + im * im;
  };
  const double dc = response(0.0);
  const double edge = response(std::numbers::pi / 32.0);
  CHECK(edge / dc == doctest::Approx(0.5).epsilon(0.01));
  // Beyond two band widths the response is well down.
  for (double w = 3.0 * std::numbers::pi / 16.0; w < std::numbers::pi; w += 0.01)
    CHECK(10.0 * std::log10(response(w) / dc) < -35.0);
}

TEST_CASE("round trip reconstructs for every supported geometry") {
  for (std::size_t channels : {8u, 16u, 32u, 64u}) {
    for (std::size_t overlap : {8u, 10u, 16u}) {
      const FilterBank bank(channels, overlap);
      CHECK(round_trip_snr(bank, white_noise(4096, channels + overlap)) >= 60.0);
    }
  }
}

TEST_CASE("round trip of white noise, sine and AR signal at 64 channels") {
  const auto& bank = bank64();
  CHECK(round_trip_snr(bank, white_noise(16000, 1, 0.3)) >= 60.0);
  CHECK(round_trip_snr(bank, sine(16000, 440.0, std::pow(10.0, -20.0 / 20.0) * std::sqrt(2.0))) >= 60.0);
  CHECK(round_trip_snr(bank, ar2(16000, 3)) >= 60.0);
  CHECK(round_trip_snr(bank, uniform_noise(16000, 4)) >= 60.0);
}

TEST_CASE("round trip of sines across the band") {
  const FilterBank bank(16, 10);
  for (double f = 50.0; f < 8000.0; f += 377.0) CHECK(round_trip_snr(bank, sine(8000, f, 0.9)) >= 60.0);
}

TEST_CASE("analyze pads to a whole number of frames and synthesize trims back") {
  const auto& bank = bank64();
  const Waveform w = white_noise(1000, 5);
  const auto x = bank.analyze(w);
  CHECK(x.frames() == 16);
  CHECK(x.channels() == 64);
  CHECK(x.source_length == 1000);
  const Waveform y = bank.synthesize(x);
  CHECK(y.size() == 1000);
  CHECK(snr_db(w.samples, y.samples) >= 60.0);
}

TEST_CASE("zeros map to zeros") {
  const auto& bank = bank64();
  Waveform w;
  w.samples.assign(640, 0.0);
  const auto x = bank.analyze(w);
  CHECK(x.coeffs.cwiseAbs().maxCoeff() == 0.0);
  const auto y = bank.synthesize(x);
  for (double v : y.samples) CHECK(v == 0.0);
}

TEST_CASE("analyze and synthesize are linear") {
  const auto& bank = bank64();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Waveform w1 = white_noise(2048, 10 + seed), w2 = white_noise(2048, 20 + seed);
    const double a = 0.7 + 0.1 * seed, b = -1.3;
    Waveform mix;
    mix.samples.resize(2048);
    for (std::size_t i = 0; i < 2048; ++i) mix.samples[i] = a * w1.samples[i] + b * w2.samples[i];
    const auto x1 = bank.analyze(w1), x2 = bank.analyze(w2), xm = bank.analyze(mix);
    const Matrix expected = a * x1.coeffs + b * x2.coeffs;
    CHECK((xm.coeffs - expected).cwiseAbs().maxCoeff() < 1e-12);

    SubbandFrames combo{expected, 2048};
    const auto ym = bank.synthesize(combo);
    const auto y1 = bank.synthesize(x1), y2 = bank.synthesize(x2);
    for (std::size_t i = 0; i < 2048; ++i)
      CHECK(ym.samples[i] == doctest::Approx(a * y1.samples[i] + b * y2.samples[i]).epsilon(1e-9));
  }
}

TEST_CASE("white noise energy is preserved within 0.1 dB") {
  const auto& bank = bank64();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Waveform w = white_noise(16000, 100 + seed);
    const auto x = bank.analyze(w);
    const double ratio_db = 10.0 * std::log10(x.coeffs.squaredNorm() / energy(w.samples));
    CHECK(std::abs(ratio_db) <= 0.1);
  }
}

TEST_CASE("white noise gives per-channel variance within 10% of the input variance") {
  const auto& bank = bank64();
  const Waveform w = white_noise(64 * 4000, 7, 0.5);
  const auto x = bank.analyze(w);
  for (Eigen::Index c = 0; c < x.coeffs.cols(); ++c) {
    const double var = x.coeffs.col(c).squaredNorm() / static_cast<double>(x.coeffs.rows());
    CHECK(var == doctest::Approx(0.25).epsilon(0.10));
  }
}

TEST_CASE("error paths") {
  const auto& bank = bank64();
  CHECK_THROWS_AS(bank.analyze(Waveform{}), Error);
  SubbandFrames wrong{Matrix::Zero(4, 16), 0};
  CHECK_THROWS_AS(bank.synthesize(wrong), Error);
}

TEST_CASE("one second round trip runs well under a second") {
  const auto start = std::chrono::steady_clock::now();
  const auto& bank = bank64();
  const Waveform w = white_noise(16000, 9);
  (void)bank.synthesize(bank.analyze(w));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(secs < 1.0);
}
