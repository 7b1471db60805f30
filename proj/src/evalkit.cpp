#include "dpss/evalkit.hpp"

#include <json.hpp>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace dpss::evalkit {

double si_sdr(std::span<const double> ref, std::span<const double> est) {
  if (ref.size() != est.size()) throw Error("si_sdr needs equal lengths");
  double rr = 0.0, re = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    rr += ref[i] * ref[i];
    re += ref[i] * est[i];
  }
  if (!(rr > 0.0)) throw Error("si_sdr reference is all zero");
  const double alpha = re / rr;
  if (alpha == 0.0) return kNegativeInfinity;
  double err = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = alpha * ref[i] - est[i];
    err += d * d;
  }
  const double sig = alpha * alpha * rr;
  if (err == 0.0) return kSiSdrCap;
  return std::min(kSiSdrCap, 10.0 * std::log10(sig / err));
}

double si_sdr(const Waveform& ref, const Waveform& est) { return si_sdr(ref.samples, est.samples); }

double mix_consistency(const std::vector<Waveform>& estimates, const Waveform& y, const sampler::MixWeights& a) {
  a.validate();
  if (estimates.size() != a.size()) throw Error("number of estimates does not match the mix weights");
  std::vector<double> g(y.size(), 0.0);
  for (std::size_t s = 0; s < estimates.size(); ++s) {
    if (estimates[s].size() != y.size()) throw Error("estimate length does not match the mix");
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += a.a[s] * estimates[s].samples[i];
  }
  return si_sdr(y.samples, g);
}

namespace {

using Spectrum = std::vector<std::complex<double>>;

// Sine-windowed frames with hop = window/2; the squared window sums to one
// so windowed overlap-add of unmodified frames restores the signal.
class Stft {
 public:
  Stft(std::size_t window, std::size_t hop) : n_(window), hop_(hop), w_(window) {
    if (window == 0 || hop == 0 || window != 2 * hop) throw Error("IRM transform needs window = 2 * hop");
    for (std::size_t k = 0; k < n_; ++k)
      w_[k] = std::sin(std::numbers::pi * (static_cast<double>(k) + 0.5) / static_cast<double>(n_));
  }

  std::size_t frames(std::size_t length) const { return (length + hop_ - 1) / hop_ + 1; }

  std::vector<Spectrum> forward(const std::vector<double>& x) {
    const std::size_t f = frames(x.size());
    std::vector<Spectrum> out(f);
    std::vector<double> buf(n_);
    for (std::size_t m = 0; m < f; ++m) {
      for (std::size_t k = 0; k < n_; ++k) {
        const auto t = static_cast<std::ptrdiff_t>(m * hop_ + k) - static_cast<std::ptrdiff_t>(hop_);
        buf[k] = t >= 0 && static_cast<std::size_t>(t) < x.size() ? w_[k] * x[static_cast<std::size_t>(t)] : 0.0;
      }
      fft_.fwd(out[m], buf);
    }
    return out;
  }

  std::vector<double> inverse(const std::vector<Spectrum>& spec, std::size_t length) {
    std::vector<double> y(length, 0.0);
    std::vector<double> buf;
    for (std::size_t m = 0; m < spec.size(); ++m) {
      fft_.inv(buf, spec[m]);
      for (std::size_t k = 0; k < n_; ++k) {
        const auto t = static_cast<std::ptrdiff_t>(m * hop_ + k) - static_cast<std::ptrdiff_t>(hop_);
        if (t >= 0 && static_cast<std::size_t>(t) < length) y[static_cast<std::size_t>(t)] += w_[k] * buf[k];
      }
    }
    return y;
  }

 private:
  std::size_t n_, hop_;
  std::vector<double> w_;
  Eigen::FFT<double> fft_;
};

}  // namespace

IrmResult irm_separate(const Waveform& y, const std::vector<Waveform>& refs, const IrmOptions& opts) {
  if (refs.empty()) throw Error("IRM needs at least one reference");
  for (const auto& r : refs)
    if (r.size() != y.size()) throw Error("IRM reference length does not match the mix");
  Stft stft(opts.window, opts.hop);
  const auto Y = stft.forward(y.samples);
  std::vector<std::vector<Spectrum>> R;
  for (const auto& r : refs) R.push_back(stft.forward(r.samples));

  IrmResult result;
  result.min_mask = 1.0;
  const std::size_t bins = opts.window;
  std::vector<std::vector<Spectrum>> masked(refs.size(), std::vector<Spectrum>(Y.size(), Spectrum(bins)));
  std::vector<double> weight(refs.size());
  for (std::size_t m = 0; m < Y.size(); ++m) {
    for (std::size_t k = 0; k < bins; ++k) {
      double total = 0.0;
      for (std::size_t s = 0; s < refs.size(); ++s) {
        const double mag = std::abs(R[s][m][k]);
        weight[s] = opts.power_ratio ? mag * mag : mag;
        total += weight[s];
      }
      double sum = 0.0;
      for (std::size_t s = 0; s < refs.size(); ++s) {
        const double mask = weight[s] / (total + opts.eps);
        sum += mask;
        result.min_mask = std::min(result.min_mask, mask);
        result.max_mask = std::max(result.max_mask, mask);
        masked[s][m][k] = mask * Y[m][k];
      }
      result.max_mask_sum = std::max(result.max_mask_sum, sum);
    }
  }
  for (std::size_t s = 0; s < refs.size(); ++s) {
    Waveform w;
    w.sample_rate = y.sample_rate;
    w.samples = stft.inverse(masked[s], y.size());
    result.estimates.push_back(std::move(w));
  }
  return result;
}

EvalReport evaluate(const std::string& method, const std::vector<std::string>& source_labels,
                    const std::vector<EvalItem>& items, const sampler::MixWeights& a) {
  a.validate();
  if (source_labels.size() != a.size()) throw Error("one source label is needed per mix weight");
  EvalReport r;
  r.method = method;
  r.source_labels = source_labels;
  r.mean_source_si_sdr.assign(a.size(), 0.0);
  for (const auto& item : items) {
    if (item.refs.size() != a.size() || item.estimates.size() != a.size())
      throw Error("item '" + item.id + "' is missing references or estimates");
    ItemScores sc;
    sc.id = item.id;
    for (std::size_t s = 0; s < a.size(); ++s) {
      if (item.refs[s].size() != item.estimates[s].size())
        throw Error("item '" + item.id + "' estimate and reference lengths differ");
      sc.source_si_sdr.push_back(si_sdr(item.refs[s], item.estimates[s]));
    }
    sc.mix_si_sdr = mix_consistency(item.estimates, item.mix, a);
    r.items.push_back(std::move(sc));
  }
  if (!r.items.empty()) {
    for (const auto& sc : r.items) {
      for (std::size_t s = 0; s < a.size(); ++s) r.mean_source_si_sdr[s] += sc.source_si_sdr[s];
      r.mean_mix_si_sdr += sc.mix_si_sdr;
    }
    const auto n = static_cast<double>(r.items.size());
    for (double& v : r.mean_source_si_sdr) v /= n;
    r.mean_mix_si_sdr /= n;
  }
  return r;
}

namespace {

nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : v < 0 ? "-inf" : "nan";
}

}  // namespace

std::string report_jsonl(const EvalReport& report) {
  std::ostringstream out;
  for (const auto& item : report.items) {
    for (std::size_t s = 0; s < item.source_si_sdr.size(); ++s)
      out << nlohmann::json{{"item", item.id}, {"method", report.method}, {"source", report.source_labels[s]},
                            {"metric", "si_sdr_db"}, {"value", number(item.source_si_sdr[s])}}.dump()
          << "\n";
    out << nlohmann::json{{"item", item.id}, {"method", report.method}, {"source", "mix"},
                          {"metric", "si_sdr_db"}, {"value", number(item.mix_si_sdr)}}.dump()
        << "\n";
  }
  return out.str();
}

std::string report_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) return "";
  std::ostringstream out;
  char buf[64];
  out << "SI-SDR [dB]";
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), " | %10s", r.method.c_str());
    out << buf;
  }
  out << "\n";
  const auto& labels = reports.front().source_labels;
  auto row = [&](const std::string& label, auto value) {
    std::snprintf(buf, sizeof(buf), "%-11s", label.c_str());
    out << buf;
    for (const auto& r : reports) {
      std::snprintf(buf, sizeof(buf), " | %10.2f", value(r));
      out << buf;
    }
    out << "\n";
  };
  for (std::size_t s = 0; s < labels.size(); ++s)
    row(labels[s], [s](const EvalReport& r) { return r.mean_source_si_sdr.at(s); });
  row("mix", [](const EvalReport& r) { return r.mean_mix_si_sdr; });
  std::snprintf(buf, sizeof(buf), "items: %zu\n", reports.front().item_count());
  out << buf;
  return out.str();
}

}  // namespace dpss::evalkit
