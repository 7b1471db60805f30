#pragma once

#include "dpss/audio.hpp"
#include "dpss/common.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace dpss::subband {

inline constexpr std::size_t kDefaultChannels = 64;
inline constexpr std::size_t kDefaultOverlap = 10;

// N frames x C channels of real subband coefficients.
struct SubbandFrames {
  Matrix coeffs;
  // Sample count of the waveform before zero padding to a whole frame.
  std::size_t source_length = 0;

  std::size_t frames() const { return static_cast<std::size_t>(coeffs.rows()); }
  std::size_t channels() const { return static_cast<std::size_t>(coeffs.cols()); }
};

struct PrototypeFilter {
  std::vector<double> taps;
  std::size_t channels = 0;
  std::size_t overlap = 0;
  // Kaiser parameters of the starting design, kept for reporting.
  double kaiser_beta = 0.0;
  double cutoff = 0.0;
};

// Lowpass prototype of length channels * overlap_factor for a cosine-modulated
// bank. A Kaiser-windowed sinc is tuned for power complementarity around
// pi/(2C) and then each polyphase pair is projected onto the lossless
// manifold, which makes the resulting bank reconstruct to round-off.
//
// channels must be a power of two in [8, 64]; overlap_factor must be even and
// in [8, 16].
PrototypeFilter design_prototype(std::size_t channels, std::size_t overlap_factor);

// Critically sampled cosine-modulated filterbank. Signals are treated as
// periodic with period N*C, so analysis of L samples gives exactly L/C frames
// and synthesis undoes the filter latency.
class FilterBank {
 public:
  explicit FilterBank(std::size_t channels = kDefaultChannels,
                      std::size_t overlap_factor = kDefaultOverlap);

  // Zero-pads to a multiple of the channel count; the original length is kept
  // in SubbandFrames::source_length.
  SubbandFrames analyze(const Waveform& w) const;
  SubbandFrames analyze(std::span<const double> samples) const;

  // Returns source_length samples (or frames*C when source_length is 0).
  Waveform synthesize(const SubbandFrames& x, int sample_rate = 16000) const;

  std::size_t channels() const { return channels_; }
  std::size_t filter_length() const { return prototype_.taps.size(); }
  // Delay of the uncompensated analysis/synthesis cascade in samples.
  std::size_t latency() const { return filter_length() - 1; }
  const PrototypeFilter& prototype() const { return prototype_; }

 private:
  std::size_t channels_;
  PrototypeFilter prototype_;
  Matrix analysis_mod_;   // C x 2C
  Matrix synthesis_mod_;  // 2C x C
};

}  // namespace dpss::subband
