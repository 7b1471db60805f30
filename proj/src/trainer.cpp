#include "dpss/trainer.hpp"

#include "dpss/parallel.hpp"
#include "dpss/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace dpss::trainer {

using srcmodel::ModelParams;
using srcmodel::NoiseLevelDb;
using srcmodel::SourceModel;

void TrainConfig::validate() const {
  if (batch_size == 0) throw Error("batch_size must be at least 1");
  if (segments_per_file == 0) throw Error("segments_per_file must be at least 1");
  if (!(seq_seconds > 0.0)) throw Error("seq_seconds must be positive");
  if (!(lr_start > 0.0) || !(lr_end > 0.0)) throw Error("learning rates must be positive");
  if (!(noise_range_db[0] <= noise_range_db[1])) throw Error("noise_range_db must be [low, high]");
  NoiseLevelDb{noise_range_db[0]}.check_conditioning_range();
  NoiseLevelDb{noise_range_db[1]}.check_conditioning_range();
  if (!(level_range_dbfs[0] <= level_range_dbfs[1]) || level_range_dbfs[1] > 0.0)
    throw Error("level_range_dbfs must be [low, high] with high <= 0");
  if (validation_interval == 0) throw Error("validation_interval must be at least 1");
  if (precision != 32 && precision != 64) throw Error("precision must be 32 or 64");
}

Dataset load_dataset(const DatasetSpec& spec) {
  if (spec.directory.has_value() == spec.synthetic.has_value())
    throw Error("dataset needs exactly one of a directory or a synthetic generator");
  Dataset d;
  auto place = [&d](synth::Split s, Waveform w) {
    switch (s) {
      case synth::Split::train: d.train.push_back(std::move(w)); break;
      case synth::Split::validation: d.validation.push_back(std::move(w)); break;
      case synth::Split::test: d.test.push_back(std::move(w)); break;
    }
  };
  if (spec.synthetic) {
    const auto& s = *spec.synthetic;
    d.sample_rate = s.sample_rate;
    const auto splits = synth::assign_splits(s.count, s.seed);
    for (std::size_t i = 0; i < s.count; ++i) place(splits[i], synth::generate_item(s, i));
  } else {
    const auto& dir = *spec.directory;
    if (!std::filesystem::is_directory(dir)) throw Error("dataset directory " + dir.string() + " does not exist");
    std::vector<std::pair<std::string, synth::Split>> files;
    if (std::filesystem::exists(dir / "manifest.json")) {
      for (const auto& e : synth::read_manifest(dir).items) files.emplace_back(e.file, e.split);
    } else {
      std::vector<std::string> names;
      for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".wav") names.push_back(entry.path().filename());
      std::sort(names.begin(), names.end());
      const auto splits = synth::assign_splits(names.size(), spec.seed);
      for (std::size_t i = 0; i < names.size(); ++i) files.emplace_back(names[i], splits[i]);
    }
    bool first = true;
    for (const auto& [name, split] : files) {
      auto w = read_wav(dir / name);
      if (first) d.sample_rate = w.sample_rate;
      else if (w.sample_rate != d.sample_rate) throw Error("mixed sample rates in " + dir.string());
      first = false;
      place(split, std::move(w));
    }
  }
  if (d.train.empty()) throw Error("dataset has no training items");
  return d;
}

subband::SubbandFrames corrupt(const subband::SubbandFrames& x, NoiseLevelDb sigma, std::uint64_t seed) {
  Rng rng = make_rng(seed, "corrupt");
  std::normal_distribution<double> g(0.0, 1.0);
  const double amp = sigma.amplitude();
  subband::SubbandFrames out = x;
  for (Eigen::Index i = 0; i < out.coeffs.size(); ++i) out.coeffs.data()[i] += amp * g(rng);
  return out;
}

double cosine_lr(std::size_t iter, const TrainConfig& cfg) {
  if (iter > cfg.iterations) throw Error("iteration " + std::to_string(iter) + " is past the schedule end");
  if (cfg.iterations == 0) return cfg.lr_start;
  const double t = static_cast<double>(iter) / static_cast<double>(cfg.iterations);
  return cfg.lr_end + 0.5 * (cfg.lr_start - cfg.lr_end) * (1.0 + std::cos(std::numbers::pi * t));
}

std::vector<double> fit_length(const std::vector<double>& x, std::size_t length, Rng& rng) {
  if (x.empty()) throw Error("cannot fit an empty item");
  std::vector<double> out(length);
  if (x.size() <= length) {
    for (std::size_t i = 0; i < length; ++i) out[i] = x[i % x.size()];
  } else {
    std::uniform_int_distribution<std::size_t> offset(0, x.size() - length);
    const std::size_t o = offset(rng);
    std::copy(x.begin() + static_cast<std::ptrdiff_t>(o), x.begin() + static_cast<std::ptrdiff_t>(o + length),
              out.begin());
  }
  return out;
}

void Adam::step(std::map<std::string, Matrix>& params, const std::map<std::string, Matrix>& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Matrix& g = git->second;
    auto [mit, fresh] = m_.try_emplace(name, Matrix::Zero(p.rows(), p.cols()));
    auto vit = v_.try_emplace(name, Matrix::Zero(p.rows(), p.cols())).first;
    Matrix& m = mit->second;
    Matrix& v = vit->second;
    m = b1_ * m + (1.0 - b1_) * g;
    v = b2_ * v + (1.0 - b2_) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

namespace {

struct Segmenter {
  std::size_t channels;
  std::size_t segment_samples;  // multiple of channels
  std::size_t segment_frames() const { return segment_samples / channels; }
};

Segmenter make_segmenter(const srcmodel::ModelConfig& mc, const TrainConfig& cfg, int sample_rate) {
  const auto c = mc.channels;
  auto samples = static_cast<std::size_t>(std::llround(cfg.seq_seconds * sample_rate));
  samples = std::max<std::size_t>(c, samples / c * c);
  return {c, samples};
}

// Item prepared for one pass: level-adjusted, analyzed, corrupted.
Matrix prepare_item(const Waveform& w, const Segmenter& seg, std::size_t segments, const subband::FilterBank& bank,
                    const TrainConfig& cfg, double sigma_db, Rng& rng, std::uint64_t noise_seed) {
  auto x = fit_length(w.samples, seg.segment_samples * segments, rng);
  std::uniform_real_distribution<double> level(cfg.level_range_dbfs[0], cfg.level_range_dbfs[1]);
  const double target = level(rng);
  const double p = mean_power(x);
  if (p > 0.0) {
    const double g = std::pow(10.0, target / 20.0) / std::sqrt(p);
    for (double& v : x) v *= g;
  }
  return corrupt(bank.analyze(x), {sigma_db}, noise_seed).coeffs;
}

template <typename T>
Tensor<T> history_before(const Matrix& frames, std::size_t row, std::size_t context) {
  Tensor<T> h = Tensor<T>::Zero(static_cast<Eigen::Index>(context), frames.cols());
  for (std::size_t k = 0; k < context; ++k) {
    const auto src = static_cast<std::ptrdiff_t>(row) - static_cast<std::ptrdiff_t>(context) + static_cast<std::ptrdiff_t>(k);
    if (src >= 0) h.row(static_cast<Eigen::Index>(k)) = frames.row(src).template cast<T>();
  }
  return h;
}

template <typename T>
double validation_nll_impl(const ModelParams& params, const std::vector<Waveform>& items, const TrainConfig& cfg) {
  const auto& mc = params.config;
  const std::size_t count = std::min(items.size(), cfg.validation_items);
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  const subband::FilterBank bank(mc.channels);
  const Segmenter seg = make_segmenter(mc, cfg, items.front().sample_rate);
  const SourceModel<T> model(params);
  std::vector<double> logp(count, 0.0);
  std::vector<double> coeffs(count, 0.0);
  parallel_for(count, [&](std::size_t i) {
    Rng rng = make_rng(cfg.seed, "validation", i);
    std::uniform_real_distribution<double> noise(cfg.noise_range_db[0], cfg.noise_range_db[1]);
    const double sigma = noise(rng);
    const Matrix frames = prepare_item(items[i], seg, cfg.segments_per_file, bank, cfg, sigma, rng,
                                       substream_seed(cfg.seed, "validation-noise", i));
    Tensor<T> h0 = Tensor<T>::Zero(1, static_cast<Eigen::Index>(mc.hidden_dim));
    const auto f = static_cast<Eigen::Index>(seg.segment_frames());
    for (std::size_t s = 0; s < cfg.segments_per_file; ++s) {
      const auto row = static_cast<Eigen::Index>(s) * f;
      const Tensor<T> x = frames.middleRows(row, f).template cast<T>();
      const Tensor<T> hist = history_before<T>(frames, static_cast<std::size_t>(row), mc.context_frames);
      const auto ev = model.evaluate(x, {sigma}, &hist, &h0);
      logp[i] += ev.log_prob;
      coeffs[i] += static_cast<double>(x.size());
      h0 = ev.hidden.bottomRows(1);
    }
  });
  double lp = 0.0, n = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    lp += logp[i];
    n += coeffs[i];
  }
  return -lp / n;
}

template <typename T>
TrainResult train_impl(const Dataset& data, const srcmodel::ModelConfig& mc, const TrainConfig& cfg,
                       const TrainHooks& hooks) {
  TrainResult result;
  ModelParams params = ModelParams::initialize(mc, cfg.seed);
  const subband::FilterBank bank(mc.channels);
  const Segmenter seg = make_segmenter(mc, cfg, data.sample_rate);
  const std::size_t batch = cfg.batch_size;
  const auto f = static_cast<Eigen::Index>(seg.segment_frames());
  const double coeffs_per_step = static_cast<double>(batch) * static_cast<double>(f * static_cast<Eigen::Index>(mc.channels));

  auto validate_now = [&](std::size_t iter, LogRecord& rec) {
    const double v = validation_nll_impl<T>(params, data.validation, cfg);
    if (!std::isfinite(v)) return;
    rec.val_nll = v;
    if (iter == 0) result.initial_val_nll = v;
    if (iter == 0 || v < result.best_val_nll) {
      result.best_val_nll = v;
      result.best = params;
      if (hooks.checkpoint) srcmodel::save_checkpoint(*hooks.checkpoint, params);
    }
  };

  const bool has_validation = !data.validation.empty() && cfg.validation_items > 0;
  result.best = params;
  result.initial_val_nll = result.best_val_nll = std::numeric_limits<double>::quiet_NaN();
  {
    LogRecord rec;
    rec.lr = cosine_lr(0, cfg);
    rec.train_nll = std::numeric_limits<double>::quiet_NaN();
    if (has_validation) validate_now(0, rec);
    else if (hooks.checkpoint) srcmodel::save_checkpoint(*hooks.checkpoint, params);
    result.log.push_back(rec);
    if (hooks.on_record) hooks.on_record(rec);
  }

  SourceModel<T> model(params);
  Adam adam;
  std::vector<Matrix> frames(batch);
  std::vector<double> sigmas(batch);
  std::vector<Tensor<T>> states(batch);
  std::vector<diffgraph::GradientResult<T>> grads(batch);

  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    const std::size_t segment = iter % cfg.segments_per_file;
    if (segment == 0) {
      const std::size_t group = iter / cfg.segments_per_file;
      parallel_for(batch, [&](std::size_t b) {
        Rng rng = make_rng(cfg.seed, "train-item", group * batch + b);
        std::uniform_int_distribution<std::size_t> pick(0, data.train.size() - 1);
        std::uniform_real_distribution<double> noise(cfg.noise_range_db[0], cfg.noise_range_db[1]);
        const auto& item = data.train[pick(rng)];
        sigmas[b] = noise(rng);
        frames[b] = prepare_item(item, seg, cfg.segments_per_file, bank, cfg, sigmas[b], rng,
                                 substream_seed(cfg.seed, "train-noise", group * batch + b));
        states[b] = Tensor<T>::Zero(1, static_cast<Eigen::Index>(mc.hidden_dim));
      });
    }
    const auto row = static_cast<Eigen::Index>(segment) * f;
    parallel_for(batch, [&](std::size_t b) {
      const Tensor<T> x = frames[b].middleRows(row, f).template cast<T>();
      const Tensor<T> hist = history_before<T>(frames[b], static_cast<std::size_t>(row), mc.context_frames);
      try {
        grads[b] = model.parameter_gradient(x, {sigmas[b]}, hist, states[b]);
      } catch (const Error& e) {
        throw Error("training failed at iteration " + std::to_string(iter) + ": " + e.what());
      }
      states[b] = grads[b].outputs.at("hidden").bottomRows(1);
    });

    double logp = 0.0;
    std::map<std::string, Matrix> total;
    for (std::size_t b = 0; b < batch; ++b) {
      logp += static_cast<double>(grads[b].value);
      for (const auto& [name, g] : grads[b].gradients) {
        auto [it, fresh] = total.try_emplace(name, g.template cast<double>());
        if (!fresh) it->second += g.template cast<double>();
      }
    }
    const double loss = -logp / coeffs_per_step;
    if (!std::isfinite(loss)) throw Error("non-finite training loss at iteration " + std::to_string(iter));
    for (auto& [name, g] : total) {
      g *= -1.0 / coeffs_per_step;
      if (!g.allFinite()) throw Error("non-finite gradient for '" + name + "' at iteration " + std::to_string(iter));
    }

    const double lr = cosine_lr(iter, cfg);
    adam.step(params.tensors, total, lr);
    model.set_params(params);

    LogRecord rec{iter + 1, lr, loss, std::nullopt};
    if (has_validation && ((iter + 1) % cfg.validation_interval == 0 || iter + 1 == cfg.iterations))
      validate_now(iter + 1, rec);
    result.log.push_back(rec);
    if (hooks.on_record) hooks.on_record(rec);
  }
  if (!has_validation) {
    result.best = params;
    if (hooks.checkpoint) srcmodel::save_checkpoint(*hooks.checkpoint, params);
  }
  result.final = std::move(params);
  return result;
}

}  // namespace

double validation_nll(const ModelParams& params, const std::vector<Waveform>& items, const TrainConfig& cfg) {
  cfg.validate();
  return cfg.precision == 64 ? validation_nll_impl<double>(params, items, cfg)
                             : validation_nll_impl<float>(params, items, cfg);
}

TrainResult train(const Dataset& data, const srcmodel::ModelConfig& model_cfg, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  model_cfg.validate();
  if (data.train.empty()) throw Error("dataset has no training items");
  return cfg.precision == 64 ? train_impl<double>(data, model_cfg, cfg, hooks)
                             : train_impl<float>(data, model_cfg, cfg, hooks);
}

}  // namespace dpss::trainer
