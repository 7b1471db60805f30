#pragma once

// Annealed Langevin separation in the subband domain.

#include "dpss/audio.hpp"
#include "dpss/rng.hpp"
#include "dpss/srcmodel.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace dpss::sampler {

using srcmodel::NoiseLevelDb;

struct MixWeights {
  std::vector<double> a{1.0, 1.0};
  void validate() const;
  double norm2() const;
  std::size_t size() const { return a.size(); }
};

enum class Variant { als, cas };

struct ScheduleConfig {
  Variant variant = Variant::cas;
  double sigma_start_db = 0.0;
  double sigma_end_db = -90.0;
  std::size_t iterations = 1500;
  double eta = 90.0;
  double eps_eta = 1e-9;
  std::uint64_t seed = 0;

  void validate() const;
  double gamma() const;
};

// Length I+1, linear in dB from start to end.
std::vector<NoiseLevelDb> geometric_schedule(const ScheduleConfig& cfg);

struct CasCoefficients {
  double alpha = 1.0;
  double beta = 0.0;
};
CasCoefficients cas_coefficients(double gamma, double eta, bool is_final);

double als_step_size(std::size_t i, std::size_t iterations, double gamma, double eps_eta);

// One [N, C] coefficient array per source.
using SourceStack = std::vector<Matrix>;

Matrix mix(const SourceStack& x, const MixWeights& a);

// Gradient of the Gaussian mix likelihood N(y; g(x), sigma^2 |a|^2) per source.
SourceStack mix_likelihood_score(const SourceStack& x, const Matrix& y, const MixWeights& a, NoiseLevelDb sigma);

class ScoreProvider {
 public:
  virtual ~ScoreProvider() = default;
  virtual Matrix score(const Matrix& x, NoiseLevelDb sigma) const = 0;
  virtual std::size_t channels() const = 0;
};

// Zero-mean Gaussian with per-channel variances v: score of x + sigma z is
// -x / (v + sigma^2).
class AnalyticGaussianScore final : public ScoreProvider {
 public:
  explicit AnalyticGaussianScore(std::vector<double> variances);
  Matrix score(const Matrix& x, NoiseLevelDb sigma) const override;
  std::size_t channels() const override { return variances_.size(); }
  const std::vector<double>& variances() const { return variances_; }

 private:
  std::vector<double> variances_;
};

template <typename T>
class ModelScore final : public ScoreProvider {
 public:
  ModelScore(const srcmodel::ModelParams& params, std::size_t segment_frames)
      : model_(params), segment_frames_(segment_frames) {}
  Matrix score(const Matrix& x, NoiseLevelDb sigma) const override { return model_.score(x, sigma, segment_frames_); }
  std::size_t channels() const override { return model_.config().channels; }

 private:
  srcmodel::SourceModel<T> model_;
  std::size_t segment_frames_;
};

// Gradients are truncated every segment_frames frames (0: never). 250 frames
// is the default training segment, 1 s at 64 channels.
constexpr std::size_t kDefaultScoreSegmentFrames = 250;

std::unique_ptr<ScoreProvider> make_model_score(const srcmodel::ModelParams& params, int precision,
                                                std::size_t segment_frames = kDefaultScoreSegmentFrames);

struct StepReport {
  std::vector<double> score_norms;  // prior score norm per source
};

// Iteration i in [1, I] of the schedule; gradients are taken at the incoming x.
SourceStack langevin_step(const SourceStack& x, const Matrix& y, const MixWeights& a,
                          const std::vector<const ScoreProvider*>& scores, const ScheduleConfig& cfg,
                          const std::vector<NoiseLevelDb>& schedule, std::size_t i, Rng& rng,
                          StepReport* report = nullptr);

struct IterationMetrics {
  std::size_t iter = 0;
  double sigma_db = 0.0;
  double mix_consistency_db = 0.0;
  std::vector<double> score_norms;
};

using MetricsSink = std::function<void(const IterationMetrics&)>;

// Runs the whole schedule from x_0 = (a_s/|a|^2) y + sigma_start z_s.
SourceStack anneal(const Matrix& y, const std::vector<const ScoreProvider*>& scores, const MixWeights& a,
                   const ScheduleConfig& cfg, const MetricsSink& sink = {});

// Waveform-level pipeline: -23 dBFS normalization, analysis, annealing,
// synthesis, de-normalization. Estimates come back in provider order with the
// length of the mix.
std::vector<Waveform> separate(const Waveform& y, const std::vector<const ScoreProvider*>& scores,
                               const MixWeights& a, const ScheduleConfig& cfg, const MetricsSink& sink = {});

inline constexpr double kMixLevelDbfs = -23.0;

}  // namespace dpss::sampler
