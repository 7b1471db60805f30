#include "dpss/subband.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace dpss::subband {
namespace {

using std::numbers::pi;

std::vector<double> kaiser_sinc(std::size_t length, double cutoff, double beta) {
  std::vector<double> h(length);
  const double center = 0.5 * static_cast<double>(length - 1);
  const double norm = std::cyl_bessel_i(0.0, beta);
  for (std::size_t n = 0; n < length; ++n) {
    const double t = static_cast<double>(n) - center;
    const double r = t / center;
    const double window = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / norm;
    const double sinc = t == 0.0 ? cutoff / pi : std::sin(cutoff * t) / (pi * t);
    h[n] = window * sinc;
  }
  return h;
}

// Mean squared deviation of |H(w)|^2 + |H(pi/C - w)|^2 from its mean over
// [0, pi/C], relative to that mean.
class FlatnessObjective {
 public:
  FlatnessObjective(std::size_t channels, std::size_t length) : half_(length / 2) {
    constexpr std::size_t kGrid = 129;
    const double center = 0.5 * static_cast<double>(length - 1);
    lower_.resize(kGrid, static_cast<Eigen::Index>(half_));
    upper_.resize(kGrid, static_cast<Eigen::Index>(half_));
    const double band = pi / static_cast<double>(channels);
    for (std::size_t g = 0; g < kGrid; ++g) {
      const double w = band * static_cast<double>(g) / static_cast<double>(kGrid - 1);
      for (std::size_t n = 0; n < half_; ++n) {
        const double t = static_cast<double>(n) - center;
        lower_(g, n) = 2.0 * std::cos(w * t);
        upper_(g, n) = 2.0 * std::cos((band - w) * t);
      }
    }
  }

  double operator()(const std::vector<double>& h) const {
    const Eigen::Map<const Eigen::VectorXd> head(h.data(), static_cast<Eigen::Index>(half_));
    const Eigen::VectorXd a = lower_ * head;
    const Eigen::VectorXd b = upper_ * head;
    const Eigen::ArrayXd t = a.array().square() + b.array().square();
    const double mean = t.mean();
    return ((t / mean) - 1.0).square().mean();
  }

 private:
  std::size_t half_;
  Eigen::MatrixXd lower_, upper_;
};

double golden_minimum(auto&& f, double lo, double hi, int iterations, double& best_value) {
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iterations; ++i) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = f(x2);
    }
  }
  best_value = std::min(f1, f2);
  return f1 < f2 ? x1 : x2;
}

// Minimum-norm Gauss-Newton projection of a polyphase pair (a, b) onto
// autocorr(a) + autocorr(b) = target * delta.
void project_pair(Eigen::VectorXd& a, Eigen::VectorXd& b, double target) {
  const Eigen::Index m = a.size();
  Eigen::VectorXd residual(m);
  Eigen::MatrixXd jac(m, 2 * m);
  for (int iter = 0; iter < 100; ++iter) {
    for (Eigen::Index d = 0; d < m; ++d) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i + d < m; ++i) acc += a[i] * a[i + d] + b[i] * b[i + d];
      residual[d] = acc - (d == 0 ? target : 0.0);
    }
    if (residual.cwiseAbs().maxCoeff() < 1e-18) break;
    jac.setZero();
    for (Eigen::Index d = 0; d < m; ++d) {
      for (Eigen::Index i = 0; i < m; ++i) {
        double ga = 0.0, gb = 0.0;
        if (i + d < m) {
          ga += a[i + d];
          gb += b[i + d];
        }
        if (i - d >= 0) {
          ga += a[i - d];
          gb += b[i - d];
        }
        jac(d, i) = ga;
        jac(d, m + i) = gb;
      }
    }
    const Eigen::VectorXd lambda = (jac * jac.transpose()).ldlt().solve(residual);
    const Eigen::VectorXd step = jac.transpose() * lambda;
    a -= step.head(m);
    b -= step.tail(m);
  }
}

}  // namespace

PrototypeFilter design_prototype(std::size_t channels, std::size_t overlap_factor) {
  if (channels < 8 || channels > 64 || !std::has_single_bit(channels))
    throw Error("unsupported channel count " + std::to_string(channels) +
                " (need a power of two in [8, 64])");
  if (overlap_factor < 8 || overlap_factor > 16 || overlap_factor % 2 != 0)
    throw Error("unsupported overlap factor " + std::to_string(overlap_factor) +
                " (need an even value in [8, 16])");

  const std::size_t length = channels * overlap_factor;
  const double nominal = pi / (2.0 * static_cast<double>(channels));
  const FlatnessObjective flatness(channels, length);

  double best_score = std::numeric_limits<double>::infinity();
  double best_beta = 0.0, best_ratio = 1.0;
  for (int step = 0; step <= 20; ++step) {
    const double beta = 6.0 + 0.25 * step;
    double score = 0.0;
    const double ratio = golden_minimum(
        [&](double r) { return flatness(kaiser_sinc(length, r * nominal, beta)); }, 1.0, 1.4, 48,
        score);
    if (score < best_score) {
      best_score = score;
      best_beta = beta;
      best_ratio = ratio;
    }
  }

  std::vector<double> h = kaiser_sinc(length, best_ratio * nominal, best_beta);

  // Lossless target: sum of the two polyphase autocorrelations equals 1/(2C),
  // which gives unit round-trip gain with the factor 2 in the modulation.
  const double target = 1.0 / (2.0 * static_cast<double>(channels));
  double energy = 0.0;
  for (double v : h) energy += v * v;
  const double gain = std::sqrt(0.5 / energy);
  for (double& v : h) v *= gain;

  const std::size_t period = 2 * channels;
  const auto taps_per_phase = static_cast<Eigen::Index>(overlap_factor / 2);
  for (std::size_t k = 0; k < channels / 2; ++k) {
    Eigen::VectorXd a(taps_per_phase), b(taps_per_phase);
    for (Eigen::Index l = 0; l < taps_per_phase; ++l) {
      a[l] = h[k + period * static_cast<std::size_t>(l)];
      b[l] = h[channels + k + period * static_cast<std::size_t>(l)];
    }
    project_pair(a, b, target);
    for (Eigen::Index l = 0; l < taps_per_phase; ++l) {
      const std::size_t ia = k + period * static_cast<std::size_t>(l);
      const std::size_t ib = channels + k + period * static_cast<std::size_t>(l);
      h[ia] = h[length - 1 - ia] = a[l];
      h[ib] = h[length - 1 - ib] = b[l];
    }
  }

  return PrototypeFilter{std::move(h), channels, overlap_factor, best_beta, best_ratio * nominal};
}

FilterBank::FilterBank(std::size_t channels, std::size_t overlap_factor)
    : channels_(channels), prototype_(design_prototype(channels, overlap_factor)) {
  const auto c = static_cast<Eigen::Index>(channels);
  const double center = 0.5 * static_cast<double>(filter_length() - 1);
  analysis_mod_.resize(c, 2 * c);
  synthesis_mod_.resize(2 * c, c);
  for (Eigen::Index k = 0; k < c; ++k) {
    const double freq = pi / static_cast<double>(c) * (static_cast<double>(k) + 0.5);
    const double phase = (k % 2 == 0 ? 1.0 : -1.0) * pi / 4.0;
    for (Eigen::Index j = 0; j < 2 * c; ++j) {
      const double arg = freq * (static_cast<double>(j) - center);
      analysis_mod_(k, j) = 2.0 * std::cos(arg + phase);
      synthesis_mod_(j, k) = 2.0 * std::cos(arg - phase);
    }
  }
}

SubbandFrames FilterBank::analyze(const Waveform& w) const {
  validate(w);
  return analyze(std::span<const double>(w.samples));
}

SubbandFrames FilterBank::analyze(std::span<const double> samples) const {
  if (samples.empty()) throw Error("cannot analyze an empty waveform");
  const std::size_t c = channels_;
  const std::size_t frames = (samples.size() + c - 1) / c;
  const std::size_t period = frames * c;
  const std::size_t length = filter_length();
  const std::size_t advance = length / 2;
  const auto& h = prototype_.taps;

  SubbandFrames out;
  out.source_length = samples.size();
  out.coeffs.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(c));

  auto sample = [&](std::size_t idx) { return idx < samples.size() ? samples[idx] : 0.0; };

  Eigen::VectorXd folded(2 * c);
  for (std::size_t m = 0; m < frames; ++m) {
    folded.setZero();
    // x((mC + advance - n) mod period), folded onto 2C taps with alternating sign.
    for (std::size_t n = 0; n < length; ++n) {
      const std::size_t pos = (m * c + advance + period * length - n) % period;
      const double sign = ((n / (2 * c)) % 2 == 0) ? 1.0 : -1.0;
      folded[static_cast<Eigen::Index>(n % (2 * c))] += sign * h[n] * sample(pos);
    }
    out.coeffs.row(static_cast<Eigen::Index>(m)) = (analysis_mod_ * folded).transpose();
  }
  return out;
}

Waveform FilterBank::synthesize(const SubbandFrames& x, int sample_rate) const {
  if (x.channels() != channels_)
    throw Error("subband frames have " + std::to_string(x.channels()) + " channels, bank has " +
                std::to_string(channels_));
  if (x.frames() == 0) throw Error("cannot synthesize zero frames");
  if (!x.coeffs.allFinite()) throw Error("subband frames contain non-finite values");

  const std::size_t c = channels_;
  const std::size_t period = x.frames() * c;
  const std::size_t length = filter_length();
  const std::size_t retard = length - 1 - length / 2;
  const auto& h = prototype_.taps;

  std::vector<double> y(period, 0.0);
  Eigen::VectorXd modulated(2 * c);
  for (std::size_t m = 0; m < x.frames(); ++m) {
    modulated = synthesis_mod_ * x.coeffs.row(static_cast<Eigen::Index>(m)).transpose();
    for (std::size_t n = 0; n < length; ++n) {
      const std::size_t pos = (m * c + period * length + n - retard) % period;
      const double sign = ((n / (2 * c)) % 2 == 0) ? 1.0 : -1.0;
      y[pos] += sign * h[n] * modulated[static_cast<Eigen::Index>(n % (2 * c))];
    }
  }

  const std::size_t keep = (x.source_length > 0 && x.source_length <= period) ? x.source_length : period;
  y.resize(keep);
  return Waveform{std::move(y), sample_rate};
}

}  // namespace dpss::subband
