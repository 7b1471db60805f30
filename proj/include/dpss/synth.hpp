#pragma once

// Synthetic source classes used as desk-scale training and evaluation data,
// and the on-disk dataset layout (WAV files plus manifest.json).

#include "dpss/audio.hpp"
#include "dpss/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dpss::synth {

enum class SourceClass { harmonic_tones, filtered_noise, gaussian_ar };

SourceClass parse_source_class(const std::string& name);
std::string to_string(SourceClass c);

struct SynthSpec {
  SourceClass source = SourceClass::harmonic_tones;
  std::size_t count = 200;
  double duration_seconds = 2.0;
  int sample_rate = 16000;
  std::uint64_t seed = 0;
  // harmonic-tones: note fundamentals in Hz, one picked per note.
  std::vector<double> fundamentals{220.0, 277.18, 329.63, 440.0};
  double note_seconds_min = 0.25;
  double note_seconds_max = 0.5;
  // filtered-noise: band-pass center range in Hz and quality factor.
  double center_hz_min = 1000.0;
  double center_hz_max = 4000.0;
  double q = 2.0;

  void validate() const;
};

// Item `index` of the class; depends only on (spec, index).
Waveform generate_item(const SynthSpec& spec, std::size_t index);

enum class Split { train, validation, test };
std::string to_string(Split s);
Split parse_split(const std::string& name);

// 80/10/10 assignment from a seeded permutation; the counts are
// floor(0.8 n), floor(0.1 n) and the remainder.
std::vector<Split> assign_splits(std::size_t n, std::uint64_t seed);

struct ManifestEntry {
  std::string file;
  Split split = Split::train;
};

struct Manifest {
  std::string source;
  int sample_rate = 16000;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> items;
};

Manifest read_manifest(const std::filesystem::path& dir);
void write_manifest(const std::filesystem::path& dir, const Manifest& m);

// Writes item_NNNN.wav (16-bit PCM) for every item plus manifest.json.
Manifest write_dataset(const std::filesystem::path& dir, const SynthSpec& spec);

}  // namespace dpss::synth
