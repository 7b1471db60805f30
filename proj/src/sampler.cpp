#include "dpss/sampler.hpp"

#include "dpss/parallel.hpp"
#include "dpss/subband.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace dpss::sampler {

void MixWeights::validate() const {
  if (a.empty()) throw Error("mix weights must not be empty");
  for (double v : a)
    if (!std::isfinite(v)) throw Error("mix weights must be finite");
  if (!(norm2() > 0.0)) throw Error("mix weights must not all be zero");
}

double MixWeights::norm2() const {
  double n = 0.0;
  for (double v : a) n += v * v;
  return n;
}

void ScheduleConfig::validate() const {
  if (!(sigma_start_db > sigma_end_db)) throw Error("sigma_start_db must exceed sigma_end_db");
  if (!std::isfinite(sigma_start_db) || !std::isfinite(sigma_end_db)) throw Error("schedule levels must be finite");
  if (iterations < 1) throw Error("iterations must be at least 1");
  if (variant == Variant::cas && !(eta >= 1.0)) throw Error("CAS needs eta >= 1");
  if (variant == Variant::als && !(eps_eta > 0.0)) throw Error("ALS needs eps_eta > 0");
}

double ScheduleConfig::gamma() const {
  return std::pow(10.0, (sigma_end_db - sigma_start_db) / (20.0 * static_cast<double>(iterations)));
}

std::vector<NoiseLevelDb> geometric_schedule(const ScheduleConfig& cfg) {
  cfg.validate();
  std::vector<NoiseLevelDb> s(cfg.iterations + 1);
  const double span = cfg.sigma_end_db - cfg.sigma_start_db;
  for (std::size_t i = 0; i <= cfg.iterations; ++i)
    s[i].value = cfg.sigma_start_db + span * static_cast<double>(i) / static_cast<double>(cfg.iterations);
  s.back().value = cfg.sigma_end_db;
  return s;
}

CasCoefficients cas_coefficients(double gamma, double eta, bool is_final) {
  if (!(eta >= 1.0)) throw Error("CAS needs eta >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error("CAS needs 0 < gamma < 1");
  if (is_final) return {1.0, 0.0};
  return {1.0 - std::pow(gamma, eta), std::sqrt(std::max(0.0, 1.0 - std::pow(gamma, 2.0 * (eta - 1.0))))};
}

double als_step_size(std::size_t i, std::size_t iterations, double gamma, double eps_eta) {
  if (i > iterations) throw Error("ALS iteration past the schedule end");
  return eps_eta * std::pow(gamma, static_cast<double>(i) - static_cast<double>(iterations));
}

namespace {

void check_shapes(const SourceStack& x, const Matrix& y, const MixWeights& a) {
  a.validate();
  if (x.size() != a.size()) throw Error("number of sources does not match the mix weights");
  for (const auto& s : x)
    if (s.rows() != y.rows() || s.cols() != y.cols()) throw Error("source estimate shape does not match the mix");
}

double flat_si_sdr(const Matrix& ref, const Matrix& est) {
  const double rr = ref.squaredNorm();
  const double alpha = rr > 0.0 ? ref.cwiseProduct(est).sum() / rr : 0.0;
  const double sig = alpha * alpha * rr;
  const double err = (alpha * ref - est).squaredNorm();
  if (err == 0.0) return 300.0;
  if (sig == 0.0) return -300.0;
  return std::min(300.0, 10.0 * std::log10(sig / err));
}

}  // namespace

Matrix mix(const SourceStack& x, const MixWeights& a) {
  if (x.empty() || x.size() != a.size()) throw Error("number of sources does not match the mix weights");
  Matrix g = a.a[0] * x[0];
  for (std::size_t s = 1; s < x.size(); ++s) g += a.a[s] * x[s];
  return g;
}

SourceStack mix_likelihood_score(const SourceStack& x, const Matrix& y, const MixWeights& a, NoiseLevelDb sigma) {
  check_shapes(x, y, a);
  const double amp = sigma.amplitude();
  if (!(amp > 0.0)) throw Error("mix likelihood is degenerate at zero noise amplitude");
  const Matrix residual = (y - mix(x, a)) / (amp * amp * a.norm2());
  SourceStack out;
  out.reserve(x.size());
  for (std::size_t s = 0; s < x.size(); ++s) out.push_back(a.a[s] * residual);
  return out;
}

AnalyticGaussianScore::AnalyticGaussianScore(std::vector<double> variances) : variances_(std::move(variances)) {
  if (variances_.empty()) throw Error("analytic score needs at least one channel variance");
  for (double v : variances_)
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error("channel variances must be finite and non-negative");
}

Matrix AnalyticGaussianScore::score(const Matrix& x, NoiseLevelDb sigma) const {
  if (static_cast<std::size_t>(x.cols()) != variances_.size()) throw Error("analytic score channel mismatch");
  const double s2 = sigma.amplitude() * sigma.amplitude();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double denom = variances_[static_cast<std::size_t>(c)] + s2;
    if (!(denom > 0.0)) throw Error("analytic score is degenerate for a zero-variance channel at zero noise");
    out.col(c) = -x.col(c) / denom;
  }
  return out;
}

template class ModelScore<float>;
template class ModelScore<double>;

std::unique_ptr<ScoreProvider> make_model_score(const srcmodel::ModelParams& params, int precision,
                                                std::size_t segment_frames) {
  if (precision == 64) return std::make_unique<ModelScore<double>>(params, segment_frames);
  if (precision == 32) return std::make_unique<ModelScore<float>>(params, segment_frames);
  throw Error("precision must be 32 or 64");
}

SourceStack langevin_step(const SourceStack& x, const Matrix& y, const MixWeights& a,
                          const std::vector<const ScoreProvider*>& scores, const ScheduleConfig& cfg,
                          const std::vector<NoiseLevelDb>& schedule, std::size_t i, Rng& rng, StepReport* report) {
  check_shapes(x, y, a);
  if (scores.size() != x.size()) throw Error("one score provider is needed per source");
  if (schedule.size() != cfg.iterations + 1) throw Error("schedule length does not match the iteration count");
  if (i < 1 || i > cfg.iterations) throw Error("iteration index out of range");

  const NoiseLevelDb sigma = schedule[i];
  const bool is_final = i == cfg.iterations;
  const double gamma = cfg.gamma();
  double step = 0.0, noise = 0.0;
  if (cfg.variant == Variant::cas) {
    const auto c = cas_coefficients(gamma, cfg.eta, is_final);
    step = c.alpha * sigma.amplitude() * sigma.amplitude();
    noise = is_final ? 0.0 : c.beta * schedule[i + 1].amplitude();
  } else {
    step = als_step_size(i, cfg.iterations, gamma, cfg.eps_eta);
    noise = std::sqrt(2.0 * step);
  }

  SourceStack prior(x.size());
  parallel_for(x.size(), [&](std::size_t s) { prior[s] = scores[s]->score(x[s], sigma); });
  const SourceStack like = mix_likelihood_score(x, y, a, sigma);

  SourceStack out(x.size());
  std::normal_distribution<double> g(0.0, 1.0);
  if (report) report->score_norms.assign(x.size(), 0.0);
  for (std::size_t s = 0; s < x.size(); ++s) {
    out[s] = x[s] + step * (prior[s] + like[s]);
    if (noise > 0.0)
      for (Eigen::Index k = 0; k < out[s].size(); ++k) out[s].data()[k] += noise * g(rng);
    if (!out[s].allFinite())
      throw Error("non-finite update for source " + std::to_string(s) + " at iteration " + std::to_string(i));
    if (report) report->score_norms[s] = prior[s].norm();
  }
  return out;
}

SourceStack anneal(const Matrix& y, const std::vector<const ScoreProvider*>& scores, const MixWeights& a,
                   const ScheduleConfig& cfg, const MetricsSink& sink) {
  cfg.validate();
  a.validate();
  if (scores.size() != a.size()) throw Error("one score provider is needed per mix weight");
  if (!y.allFinite()) throw Error("mix contains non-finite coefficients");
  const auto schedule = geometric_schedule(cfg);
  Rng rng = make_rng(cfg.seed, "sampler");
  std::normal_distribution<double> g(0.0, 1.0);
  const double start = schedule.front().amplitude();
  SourceStack x(a.size());
  for (std::size_t s = 0; s < a.size(); ++s) {
    x[s] = (a.a[s] / a.norm2()) * y;
    for (Eigen::Index k = 0; k < x[s].size(); ++k) x[s].data()[k] += start * g(rng);
  }
  StepReport report;
  for (std::size_t i = 1; i <= cfg.iterations; ++i) {
    x = langevin_step(x, y, a, scores, cfg, schedule, i, rng, sink ? &report : nullptr);
    if (sink) sink({i, schedule[i].value, flat_si_sdr(y, mix(x, a)), report.score_norms});
  }
  return x;
}

std::vector<Waveform> separate(const Waveform& y, const std::vector<const ScoreProvider*>& scores,
                               const MixWeights& a, const ScheduleConfig& cfg, const MetricsSink& sink) {
  validate(y);
  if (scores.size() < 2) throw Error("separation needs at least two score providers");
  const std::size_t channels = scores.front()->channels();
  for (const auto* p : scores)
    if (p->channels() != channels) throw Error("score providers disagree on the channel count");
  const double power = mean_power(y.samples);
  if (!(power > 0.0)) throw Error("mix is silent");
  const double gain = std::pow(10.0, kMixLevelDbfs / 20.0) / std::sqrt(power);

  std::vector<double> scaled(y.samples);
  for (double& v : scaled) v *= gain;
  const subband::FilterBank bank(channels);
  const auto frames = bank.analyze(scaled);
  const auto x = anneal(frames.coeffs, scores, a, cfg, sink);

  std::vector<Waveform> out;
  for (const auto& est : x) {
    auto w = bank.synthesize({est, frames.source_length}, y.sample_rate);
    w.samples.resize(y.size());
    for (double& v : w.samples) v /= gain;
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace dpss::sampler
