#pragma once

#include "dpss/audio.hpp"
#include "dpss/rng.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace dpss::testing {

inline Waveform white_noise(std::size_t n, std::uint64_t seed, double stddev = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  Waveform w;
  w.samples.resize(n);
  for (double& s : w.samples) s = normal(rng);
  return w;
}

inline Waveform uniform_noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Waveform w;
  w.samples.resize(n);
  for (double& s : w.samples) s = u(rng);
  return w;
}

inline Waveform sine(std::size_t n, double freq, double amplitude, int rate = 16000) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    w.samples[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate);
  return w;
}

// Resonant AR(2) process, a crude stand-in for voiced speech.
inline Waveform ar2(std::size_t n, std::uint64_t seed, double radius = 0.97, double freq = 600.0) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  const double a1 = 2.0 * radius * std::cos(2.0 * std::numbers::pi * freq / 16000.0);
  const double a2 = -radius * radius;
  Waveform w;
  w.samples.resize(n);
  double y1 = 0.0, y2 = 0.0;
  for (double& s : w.samples) {
    s = a1 * y1 + a2 * y2 + normal(rng);
    y2 = y1;
    y1 = s;
  }
  return w;
}

inline double snr_db(std::span<const double> ref, std::span<const double> est) {
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    sig += ref[i] * ref[i];
    err += (ref[i] - est[i]) * (ref[i] - est[i]);
  }
  return 10.0 * std::log10(sig / err);
}

inline double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

}  // namespace dpss::testing
