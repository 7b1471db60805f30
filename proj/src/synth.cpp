#include "dpss/synth.hpp"

#include "dpss/common.hpp"
#include "dpss/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

namespace dpss::synth {

namespace {

constexpr double kPeak = 0.5;

void normalize_peak(std::vector<double>& x) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : x) v *= kPeak / peak;
}

std::vector<double> harmonic_tones(const SynthSpec& spec, Rng& rng, std::size_t n) {
  const double sr = spec.sample_rate;
  std::vector<double> x(n, 0.0);
  std::uniform_int_distribution<std::size_t> pick(0, spec.fundamentals.size() - 1);
  std::uniform_real_distribution<double> dur(spec.note_seconds_min, spec.note_seconds_max);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> decay(0.15, 0.6);
  std::uniform_real_distribution<double> gain(0.5, 1.0);
  std::size_t start = 0;
  while (start < n) {
    const double f0 = spec.fundamentals[pick(rng)];
    const auto len = static_cast<std::size_t>(dur(rng) * sr);
    const double tau = decay(rng);
    const double g = gain(rng);
    const std::size_t attack = static_cast<std::size_t>(0.005 * sr);
    std::vector<double> phases;
    for (int k = 1; k * f0 < 0.45 * sr; ++k) phases.push_back(phase(rng));
    // Notes ring into the next one for a short release so onsets overlap.
    const std::size_t end = std::min(n, start + len + static_cast<std::size_t>(0.05 * sr));
    for (std::size_t t = start; t < end; ++t) {
      const double time = static_cast<double>(t - start) / sr;
      double env = g * std::exp(-time / tau);
      if (t - start < attack) env *= static_cast<double>(t - start) / static_cast<double>(attack);
      if (t >= start + len) env *= 1.0 - static_cast<double>(t - start - len) / (0.05 * sr);
      double v = 0.0;
      for (std::size_t k = 0; k < phases.size(); ++k) {
        const double h = static_cast<double>(k + 1);
        v += std::sin(2.0 * std::numbers::pi * h * f0 * time + phases[k]) / h;
      }
      x[t] += env * v;
    }
    start += std::max<std::size_t>(len, 1);
  }
  return x;
}

// RBJ band-pass biquad (constant 0 dB peak gain) over white noise.
std::vector<double> filtered_noise(const SynthSpec& spec, Rng& rng, std::size_t n) {
  const double sr = spec.sample_rate;
  std::uniform_real_distribution<double> logc(std::log(spec.center_hz_min), std::log(spec.center_hz_max));
  const double fc = std::exp(logc(rng));
  const double w0 = 2.0 * std::numbers::pi * fc / sr;
  const double alpha = std::sin(w0) / (2.0 * spec.q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  // Warm-up so the item starts in steady state.
  const std::size_t warm = static_cast<std::size_t>(sr * 0.05);
  for (std::size_t t = 0; t < n + warm; ++t) {
    const double in = g(rng);
    const double y = b0 * in + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = in;
    y2 = y1;
    y1 = y;
    if (t >= warm) x[t - warm] = y;
  }
  return x;
}

std::vector<double> gaussian_ar(const SynthSpec& spec, Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> radius(0.9, 0.99);
  std::uniform_real_distribution<double> angle(0.05, 0.5 * std::numbers::pi);
  const double r = radius(rng), th = angle(rng);
  const double a1 = 2.0 * r * std::cos(th), a2 = -r * r;
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  double y1 = 0, y2 = 0;
  const std::size_t warm = static_cast<std::size_t>(spec.sample_rate * 0.05);
  for (std::size_t t = 0; t < n + warm; ++t) {
    const double y = a1 * y1 + a2 * y2 + g(rng);
    y2 = y1;
    y1 = y;
    if (t >= warm) x[t - warm] = y;
  }
  return x;
}

}  // namespace

SourceClass parse_source_class(const std::string& name) {
  if (name == "harmonic-tones") return SourceClass::harmonic_tones;
  if (name == "filtered-noise") return SourceClass::filtered_noise;
  if (name == "gaussian-ar") return SourceClass::gaussian_ar;
  throw Error("unknown source class '" + name + "' (expected harmonic-tones, filtered-noise or gaussian-ar)");
}

std::string to_string(SourceClass c) {
  switch (c) {
    case SourceClass::harmonic_tones: return "harmonic-tones";
    case SourceClass::filtered_noise: return "filtered-noise";
    case SourceClass::gaussian_ar: return "gaussian-ar";
  }
  return "?";
}

void SynthSpec::validate() const {
  if (!(duration_seconds > 0.0)) throw Error("duration_seconds must be positive");
  if (sample_rate <= 0) throw Error("sample_rate must be positive");
  if (fundamentals.empty()) throw Error("fundamentals must not be empty");
  for (double f : fundamentals)
    if (!(f > 0.0 && f < 0.5 * sample_rate)) throw Error("fundamentals must lie in (0, Nyquist)");
  if (!(note_seconds_min > 0.0 && note_seconds_max >= note_seconds_min)) throw Error("bad note duration range");
  if (!(center_hz_min > 0.0 && center_hz_max >= center_hz_min && center_hz_max < 0.5 * sample_rate))
    throw Error("bad band-pass center range");
  if (!(q > 0.0)) throw Error("q must be positive");
}

Waveform generate_item(const SynthSpec& spec, std::size_t index) {
  spec.validate();
  Rng rng = make_rng(spec.seed, to_string(spec.source), index);
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_seconds * spec.sample_rate));
  Waveform w;
  w.sample_rate = spec.sample_rate;
  switch (spec.source) {
    case SourceClass::harmonic_tones: w.samples = harmonic_tones(spec, rng, n); break;
    case SourceClass::filtered_noise: w.samples = filtered_noise(spec, rng, n); break;
    case SourceClass::gaussian_ar: w.samples = gaussian_ar(spec, rng, n); break;
  }
  normalize_peak(w.samples);
  return w;
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "validation") return Split::validation;
  if (name == "test") return Split::test;
  throw Error("unknown split '" + name + "'");
}

std::vector<Split> assign_splits(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = make_rng(seed, "split");
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train = n * 8 / 10, n_val = n / 10;
  std::vector<Split> out(n);
  for (std::size_t r = 0; r < n; ++r)
    out[order[r]] = r < n_train ? Split::train : r < n_train + n_val ? Split::validation : Split::test;
  return out;
}

Manifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    Manifest m;
    m.source = j.value("source", std::string());
    m.sample_rate = j.value("sample_rate", 16000);
    m.seed = j.value("seed", std::uint64_t{0});
    for (const auto& e : j.at("items"))
      m.items.push_back({e.at("file").get<std::string>(), parse_split(e.at("split").get<std::string>())});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed manifest " + path.string() + ": " + e.what());
  }
}

void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
  nlohmann::json j;
  j["source"] = m.source;
  j["sample_rate"] = m.sample_rate;
  j["seed"] = m.seed;
  j["items"] = nlohmann::json::array();
  for (const auto& e : m.items) j["items"].push_back({{"file", e.file}, {"split", to_string(e.split)}});
  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw Error("failed writing " + path.string());
}

Manifest write_dataset(const std::filesystem::path& dir, const SynthSpec& spec) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error("cannot create output directory " + dir.string());
  Manifest m;
  m.source = to_string(spec.source);
  m.sample_rate = spec.sample_rate;
  m.seed = spec.seed;
  const auto splits = assign_splits(spec.count, spec.seed);
  for (std::size_t i = 0; i < spec.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "item_%04zu.wav", i);
    write_wav(dir / name, generate_item(spec, i), SampleFormat::pcm16);
    m.items.push_back({name, splits[i]});
  }
  write_manifest(dir, m);
  return m;
}

}  // namespace dpss::synth
