#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace dpss {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
};

// Throws Error if the waveform is empty or holds a non-finite sample.
void validate(const Waveform& w);

double mean_power(std::span<const double> x);
double rms_dbfs(std::span<const double> x);

enum class SampleFormat { pcm16, float32 };

// Mono RIFF/WAVE. 16-bit PCM maps to [-1, 1) by 1/32768; float32 is stored
// as-is. Multi-channel files are rejected.
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& w, SampleFormat format);

}  // namespace dpss
