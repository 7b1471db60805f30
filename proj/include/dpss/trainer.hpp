#pragma once

// Negative-log-likelihood training of the source model on noise-corrupted
// subband signals.

#include "dpss/audio.hpp"
#include "dpss/rng.hpp"
#include "dpss/srcmodel.hpp"
#include "dpss/subband.hpp"
#include "dpss/synth.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace dpss::trainer {

struct TrainConfig {
  std::size_t iterations = 1000000;
  std::size_t batch_size = 64;
  double seq_seconds = 1.0;
  double lr_start = 1e-4;
  double lr_end = 1e-6;
  std::array<double, 2> noise_range_db{-90.0, 0.0};
  std::size_t segments_per_file = 8;
  std::uint64_t seed = 0;
  // Each item is rescaled to an RMS level drawn from this range (dBFS).
  std::array<double, 2> level_range_dbfs{-32.0, -20.0};
  std::size_t validation_interval = 1000;
  std::size_t validation_items = 16;
  int precision = 32;

  void validate() const;
  double item_seconds() const { return seq_seconds * static_cast<double>(segments_per_file); }
};

struct Dataset {
  int sample_rate = 16000;
  std::vector<Waveform> train;
  std::vector<Waveform> validation;
  std::vector<Waveform> test;
};

// Either a directory (manifest.json if present, else every *.wav split
// 80/10/10 by seed) or a synthetic class generated in memory.
struct DatasetSpec {
  std::optional<std::filesystem::path> directory;
  std::optional<synth::SynthSpec> synthetic;
  std::uint64_t seed = 0;
};

Dataset load_dataset(const DatasetSpec& spec);

// X + 10^(dB/20) Z with Z standard normal per entry.
subband::SubbandFrames corrupt(const subband::SubbandFrames& x, srcmodel::NoiseLevelDb sigma, std::uint64_t seed);

double cosine_lr(std::size_t iter, const TrainConfig& cfg);

// Fits an item to `length` samples: shorter items are repeated, longer ones
// cut at an offset drawn from rng.
std::vector<double> fit_length(const std::vector<double>& x, std::size_t length, Rng& rng);

class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) : b1_(beta1), b2_(beta2), eps_(eps) {}
  // One descent step of size lr.
  void step(std::map<std::string, Matrix>& params, const std::map<std::string, Matrix>& grads, double lr);
  std::size_t steps() const { return t_; }

 private:
  double b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::map<std::string, Matrix> m_, v_;
};

struct LogRecord {
  std::size_t iter = 0;
  double lr = 0.0;
  double train_nll = 0.0;
  std::optional<double> val_nll;
};

struct TrainResult {
  srcmodel::ModelParams best;   // lowest validation NLL seen
  srcmodel::ModelParams final;
  std::vector<LogRecord> log;
  double initial_val_nll = 0.0;
  double best_val_nll = 0.0;
};

// Mean NLL per subband coefficient over the validation items, each evaluated
// as consecutive segments with carried state at a noise level fixed per item.
double validation_nll(const srcmodel::ModelParams& params, const std::vector<Waveform>& items,
                      const TrainConfig& cfg);

struct TrainHooks {
  std::function<void(const LogRecord&)> on_record;
  std::optional<std::filesystem::path> checkpoint;  // best-validation checkpoint
};

TrainResult train(const Dataset& data, const srcmodel::ModelConfig& model_cfg, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

}  // namespace dpss::trainer
