#pragma once

// Objective metrics and the ideal-ratio-mask oracle baseline.

#include "dpss/audio.hpp"
#include "dpss/sampler.hpp"

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace dpss::evalkit {

inline constexpr double kSiSdrCap = 300.0;
inline constexpr double kNegativeInfinity = -std::numeric_limits<double>::infinity();

// Scale-invariant SDR in dB, capped at kSiSdrCap; -inf when the estimate has
// no component along the reference.
double si_sdr(std::span<const double> ref, std::span<const double> est);
double si_sdr(const Waveform& ref, const Waveform& est);

// si_sdr(y, sum_s a_s est_s)
double mix_consistency(const std::vector<Waveform>& estimates, const Waveform& y, const sampler::MixWeights& a);

struct IrmOptions {
  std::size_t window = 2048;
  std::size_t hop = 1024;
  bool power_ratio = false;  // |R_s|^2 / sum |R_j|^2 instead of magnitudes
  double eps = 1e-12;
};

struct IrmResult {
  std::vector<Waveform> estimates;
  double min_mask = 0.0;
  double max_mask = 0.0;
  double max_mask_sum = 0.0;
};

IrmResult irm_separate(const Waveform& y, const std::vector<Waveform>& refs, const IrmOptions& opts = {});

struct ItemScores {
  std::string id;
  std::vector<double> source_si_sdr;
  double mix_si_sdr = 0.0;
};

struct EvalReport {
  std::string method;
  std::vector<std::string> source_labels;
  std::vector<ItemScores> items;
  std::vector<double> mean_source_si_sdr;
  double mean_mix_si_sdr = 0.0;
  std::size_t item_count() const { return items.size(); }
};

struct EvalItem {
  std::string id;
  Waveform mix;
  std::vector<Waveform> refs;
  std::vector<Waveform> estimates;
};

EvalReport evaluate(const std::string& method, const std::vector<std::string>& source_labels,
                    const std::vector<EvalItem>& items, const sampler::MixWeights& a);

// One JSON object per (item, source, metric) line.
std::string report_jsonl(const EvalReport& report);
// Rows: one per source then "mix"; one column per report.
std::string report_table(const std::vector<EvalReport>& reports);

}  // namespace dpss::evalkit
