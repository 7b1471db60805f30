#include "dpss/srcmodel.hpp"

#include "dpss/rng.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

namespace dpss::srcmodel {

void NoiseLevelDb::check_conditioning_range() const {
  if (!std::isfinite(value) || value < kMinNoiseDb || value > kMaxNoiseDb)
    throw Error("noise level " + std::to_string(value) + " dB is outside [-90, 0] dB");
}

void ModelConfig::validate() const {
  if (context_frames == 0) throw Error("context_frames must be at least 1");
  if (channels == 0) throw Error("channels must be at least 1");
  if (hidden_dim == 0) throw Error("hidden_dim must be at least 1");
  if (mlp_layers < 1) throw Error("mlp_layers must be at least 1");
  if (rff_dim == 0 || rff_dim % 2 != 0) throw Error("rff_dim must be a positive even number");
  if (recurrent_state_dim != hidden_dim)
    throw Error("recurrent_state_dim must equal hidden_dim (single GRU layer)");
}

namespace {

std::string layer(const char* prefix, std::size_t l, const char* what) {
  return std::string(prefix) + ".l" + std::to_string(l) + "." + what;
}

}  // namespace

std::map<std::string, std::pair<std::size_t, std::size_t>> parameter_shapes(const ModelConfig& c) {
  c.validate();
  std::map<std::string, std::pair<std::size_t, std::size_t>> shapes;
  const std::size_t h = c.hidden_dim;
  for (std::size_t l = 0; l < c.mlp_layers; ++l) {
    const std::size_t in = l == 0 ? c.rff_dim : h;
    shapes[layer("cond", l, "w")] = {h, in};
    shapes[layer("cond", l, "b")] = {1, h};
  }
  shapes["conv.w"] = {h, c.context_frames * c.channels};
  shapes["conv.b"] = {1, h};
  shapes["gru.w_ih"] = {3 * h, h};
  shapes["gru.w_hh"] = {3 * h, h};
  shapes["gru.b_ih"] = {1, 3 * h};
  shapes["gru.b_hh"] = {1, 3 * h};
  for (std::size_t l = 0; l < c.mlp_layers; ++l) {
    const std::size_t out = l + 1 == c.mlp_layers ? c.output_size() : h;
    shapes[layer("pred", l, "w")] = {out, h};
    shapes[layer("pred", l, "b")] = {1, out};
  }
  return shapes;
}

ModelParams ModelParams::initialize(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.config = config;

  Rng rff_rng = make_rng(seed, "rff");
  std::normal_distribution<double> normal(0.0, kRffScale);
  p.rff_frequencies.resize(config.rff_dim / 2);
  for (double& f : p.rff_frequencies) f = normal(rff_rng);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases, with the
  // fan-in of the layer a bias belongs to.
  const auto shapes = parameter_shapes(config);
  std::uint64_t index = 0;
  for (const auto& [name, shape] : shapes) {
    const auto [rows, cols] = shape;
    std::size_t fan_in = cols;
    if (name.ends_with(".b") || name.starts_with("gru.b") || name == "conv.b") {
      const std::string w = name.starts_with("gru.b") ? "gru.w_hh" : name.substr(0, name.size() - 1) + "w";
      fan_in = shapes.at(w).second;
    }
    Rng rng = make_rng(seed, "init", index++);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    p.tensors.emplace(name, std::move(m));
  }
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += static_cast<std::size_t>(t.size());
  return n;
}

void ModelParams::validate() const {
  const auto shapes = parameter_shapes(config);
  if (rff_frequencies.size() != config.rff_dim / 2) throw Error("checkpoint has the wrong number of RFF frequencies");
  for (const auto& [name, shape] : shapes) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("missing parameter tensor '" + name + "'");
    if (static_cast<std::size_t>(it->second.rows()) != shape.first ||
        static_cast<std::size_t>(it->second.cols()) != shape.second)
      throw Error("parameter tensor '" + name + "' has the wrong shape");
    if (!it->second.allFinite()) throw Error("parameter tensor '" + name + "' has non-finite entries");
  }
  if (tensors.size() != shapes.size()) throw Error("checkpoint has unexpected parameter tensors");
}

// ---------------------------------------------------------------------------
// Checkpoint format

namespace {

constexpr char kMagic[8] = {'D', 'P', 'S', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_bytes(const char* p, std::size_t n) { bytes.insert(bytes.end(), p, p + n); }
  std::vector<char> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<char>& b) : bytes_(b) {}
  template <typename T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error("checkpoint is truncated");
  }
  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<char> serialize(const ModelParams& params) {
  params.validate();
  Writer w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kVersion);
  const auto& c = params.config;
  for (std::size_t v : {c.context_frames, c.channels, c.hidden_dim, c.mlp_layers, c.rff_dim, c.recurrent_state_dim})
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.rff_frequencies.size()));
  for (double f : params.rff_frequencies) w.put<double>(f);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& [name, t] : params.tensors) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index i = 0; i < t.size(); ++i) w.put<double>(t.data()[i]);
  }
  return std::move(w.bytes);
}

ModelParams deserialize(const std::vector<char>& bytes) {
  Reader r(bytes);
  if (r.get_string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) throw Error("not a DPSS checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  ModelParams p;
  auto& c = p.config;
  c.context_frames = r.get<std::uint32_t>();
  c.channels = r.get<std::uint32_t>();
  c.hidden_dim = r.get<std::uint32_t>();
  c.mlp_layers = r.get<std::uint32_t>();
  c.rff_dim = r.get<std::uint32_t>();
  c.recurrent_state_dim = r.get<std::uint32_t>();
  c.validate();
  p.rff_frequencies.resize(r.get<std::uint32_t>());
  for (double& f : p.rff_frequencies) f = r.get<double>();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto name = r.get_string(r.get<std::uint32_t>());
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.get<double>();
    p.tensors.emplace(name, std::move(m));
  }
  if (!r.done()) throw Error("trailing bytes after checkpoint");
  p.validate();
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  const auto bytes = serialize(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

// ---------------------------------------------------------------------------
// SourceModel

template <typename T>
SourceModel<T>::SourceModel(const ModelParams& params) : config_(params.config) {
  set_params(params);
  build_graph();
}

template <typename T>
void SourceModel<T>::set_params(const ModelParams& params) {
  params.validate();
  if (!(params.config == config_)) throw Error("parameters belong to a different model configuration");
  tensors_.clear();
  param_names_.clear();
  for (const auto& [name, t] : params.tensors) {
    tensors_.emplace(name, t.template cast<T>());
    param_names_.push_back(name);
  }
  rff_weight_.resize(static_cast<Eigen::Index>(params.rff_frequencies.size()), 1);
  for (std::size_t k = 0; k < params.rff_frequencies.size(); ++k)
    rff_weight_(static_cast<Eigen::Index>(k), 0) =
        static_cast<T>(2.0 * std::numbers::pi * params.rff_frequencies[k]);
}

template <typename T>
void SourceModel<T>::build_graph() {
  auto& g = graph_;
  const auto& c = config_;

  const auto sigma_hat = g.input("sigma_hat");
  const auto projected = g.linear(sigma_hat, g.input("rff.weight"));
  auto cond = g.concat(g.sin(projected), g.cos(projected));
  for (std::size_t l = 0; l < c.mlp_layers; ++l) {
    cond = g.affine(cond, g.input(layer("cond", l, "w")), g.input(layer("cond", l, "b")));
    if (l + 1 < c.mlp_layers) cond = g.relu(cond);
  }

  const auto frames = g.input("frames");
  const auto conv = g.causal_conv(frames, g.input("history"), g.input("conv.w"), g.input("conv.b"), c.context_frames);
  const auto hidden = g.gru(g.add(conv, cond), g.input("h0"), g.input("gru.w_ih"), g.input("gru.w_hh"),
                            g.input("gru.b_ih"), g.input("gru.b_hh"));
  auto out = hidden;
  for (std::size_t l = 0; l < c.mlp_layers; ++l) {
    out = g.affine(out, g.input(layer("pred", l, "w")), g.input(layer("pred", l, "b")));
    if (l + 1 < c.mlp_layers) out = g.relu(out);
  }
  const auto mu = g.slice_cols(out, 0, c.channels);
  const auto scale = g.add_scalar(g.softplus(g.slice_cols(out, c.channels, 2 * c.channels)), kScaleFloor);
  log_prob_node_ = g.reduce_sum(g.logistic_log_density(frames, mu, scale));

  g.set_output("log_prob", log_prob_node_);
  g.set_output("mu", mu);
  g.set_output("scale", scale);
  g.set_output("hidden", hidden);
}

template <typename T>
diffgraph::Bindings<T> SourceModel<T>::bind(const Tensor<T>& frames, const Tensor<T>& sigma_hat,
                                            const Tensor<T>& history, const Tensor<T>& h0) const {
  if (static_cast<std::size_t>(frames.cols()) != config_.channels)
    throw Error("frames have " + std::to_string(frames.cols()) + " channels, model expects " +
                std::to_string(config_.channels));
  diffgraph::Bindings<T> b;
  b.set("frames", frames).set("sigma_hat", sigma_hat).set("history", history).set("h0", h0);
  b.set("rff.weight", rff_weight_);
  for (const auto& [name, t] : tensors_) b.set(name, t);
  return b;
}

template <typename T>
RowVector<T> SourceModel<T>::rff_embed(NoiseLevelDb sigma) const {
  sigma.check_conditioning_range();
  const auto half = rff_weight_.rows();
  RowVector<T> out(2 * half);
  const T s = static_cast<T>(sigma.normalized());
  for (Eigen::Index k = 0; k < half; ++k) {
    out[k] = std::sin(rff_weight_(k, 0) * s);
    out[half + k] = std::cos(rff_weight_(k, 0) * s);
  }
  return out;
}

template <typename T>
RowVector<T> SourceModel<T>::condition(NoiseLevelDb sigma) const {
  RowVector<T> x = rff_embed(sigma);
  for (std::size_t l = 0; l < config_.mlp_layers; ++l) {
    const auto& w = tensors_.at(layer("cond", l, "w"));
    const auto& b = tensors_.at(layer("cond", l, "b"));
    RowVector<T> y = x * w.transpose() + b;
    if (l + 1 < config_.mlp_layers) y = y.cwiseMax(T(0));
    x = std::move(y);
  }
  return x;
}

template <typename T>
FramePrediction<T> SourceModel<T>::predict_frame(const Tensor<T>& context, const RowVector<T>& state,
                                                 const RowVector<T>& cond) const {
  const auto l = static_cast<Eigen::Index>(config_.context_frames);
  const auto c = static_cast<Eigen::Index>(config_.channels);
  const auto h = static_cast<Eigen::Index>(config_.hidden_dim);
  if (context.rows() != l || context.cols() != c) throw Error("predict_frame needs exactly L context frames of C channels");
  if (state.size() != h || cond.size() != h) throw Error("predict_frame state/conditioning size mismatch");

  const Eigen::Map<const RowVector<T>> flat(context.data(), l * c);
  const RowVector<T> u = flat * tensors_.at("conv.w").transpose() + tensors_.at("conv.b") + cond;

  const RowVector<T> gx = u * tensors_.at("gru.w_ih").transpose() + tensors_.at("gru.b_ih");
  const RowVector<T> gh = state * tensors_.at("gru.w_hh").transpose() + tensors_.at("gru.b_hh");
  RowVector<T> next(h);
  for (Eigen::Index j = 0; j < h; ++j) {
    const T r = T(1) / (T(1) + std::exp(-(gx[j] + gh[j])));
    const T z = T(1) / (T(1) + std::exp(-(gx[h + j] + gh[h + j])));
    const T n = std::tanh(gx[2 * h + j] + r * gh[2 * h + j]);
    next[j] = (T(1) - z) * n + z * state[j];
  }

  RowVector<T> x = next;
  for (std::size_t k = 0; k < config_.mlp_layers; ++k) {
    RowVector<T> y = x * tensors_.at(layer("pred", k, "w")).transpose() + tensors_.at(layer("pred", k, "b"));
    if (k + 1 < config_.mlp_layers) y = y.cwiseMax(T(0));
    x = std::move(y);
  }

  FramePrediction<T> out;
  out.params.mu = x.head(c);
  out.params.s = x.tail(c).unaryExpr([](T v) {
    return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))) + static_cast<T>(kScaleFloor);
  });
  out.state = std::move(next);
  return out;
}

template <typename T>
SequenceEvaluation<T> SourceModel<T>::evaluate(const Tensor<T>& frames, NoiseLevelDb sigma,
                                               const Tensor<T>* history, const Tensor<T>* h0) const {
  sigma.check_conditioning_range();
  const Tensor<T> sigma_hat = Tensor<T>::Constant(1, 1, static_cast<T>(sigma.normalized()));
  const Tensor<T> zero_hist = Tensor<T>::Zero(static_cast<Eigen::Index>(config_.context_frames),
                                              static_cast<Eigen::Index>(config_.channels));
  const Tensor<T> zero_state = Tensor<T>::Zero(1, static_cast<Eigen::Index>(config_.hidden_dim));
  auto out = graph_.forward(bind(frames, sigma_hat, history ? *history : zero_hist, h0 ? *h0 : zero_state));
  SequenceEvaluation<T> result;
  result.log_prob = static_cast<double>(out.at("log_prob")(0, 0));
  if (!std::isfinite(result.log_prob)) throw Error("log probability is not finite");
  result.mu = std::move(out.at("mu"));
  result.scale = std::move(out.at("scale"));
  result.hidden = std::move(out.at("hidden"));
  return result;
}

template <typename T>
double SourceModel<T>::log_prob(const Matrix& frames, NoiseLevelDb sigma) const {
  const Tensor<T> x = frames.template cast<T>();
  return evaluate(x, sigma).log_prob;
}

template <typename T>
Matrix SourceModel<T>::score(const Matrix& frames, NoiseLevelDb sigma, std::size_t segment_frames) const {
  double unused = 0.0;
  return score(frames, sigma, unused, segment_frames);
}

template <typename T>
Matrix SourceModel<T>::score(const Matrix& frames, NoiseLevelDb sigma, double& log_prob,
                             std::size_t segment_frames) const {
  sigma.check_conditioning_range();
  const Tensor<T> x = frames.template cast<T>();
  const Tensor<T> sigma_hat = Tensor<T>::Constant(1, 1, static_cast<T>(sigma.normalized()));
  const auto context = static_cast<Eigen::Index>(config_.context_frames);
  Tensor<T> hist = Tensor<T>::Zero(context, static_cast<Eigen::Index>(config_.channels));
  Tensor<T> h0 = Tensor<T>::Zero(1, static_cast<Eigen::Index>(config_.hidden_dim));
  const Eigen::Index n = x.rows();
  const Eigen::Index step = segment_frames == 0 ? std::max<Eigen::Index>(n, 1) : static_cast<Eigen::Index>(segment_frames);

  Matrix grad(x.rows(), x.cols());
  log_prob = 0.0;
  for (Eigen::Index start = 0;; start += step) {
    const Eigen::Index len = std::min(step, n - start);
    const Tensor<T> seg = x.middleRows(start, len);
    auto result = graph_.gradient(bind(seg, sigma_hat, hist, h0), log_prob_node_, {"frames"});
    log_prob += static_cast<double>(result.value);
    grad.middleRows(start, len) = result.gradients.at("frames").template cast<double>();
    if (start + len >= n) break;
    h0 = result.outputs.at("hidden").bottomRows(1);
    // History for the next segment: the last L frames before it, zero-padded.
    Tensor<T> next = Tensor<T>::Zero(context, x.cols());
    for (Eigen::Index k = 0; k < context; ++k) {
      const Eigen::Index src = start + len - context + k;
      if (src >= 0) next.row(k) = x.row(src);
    }
    hist = std::move(next);
  }
  if (!std::isfinite(log_prob)) throw Error("log probability is not finite");
  if (!grad.allFinite()) throw Error("score is not finite");
  return grad;
}

template <typename T>
diffgraph::GradientResult<T> SourceModel<T>::parameter_gradient(const Tensor<T>& frames, NoiseLevelDb sigma,
                                                                const Tensor<T>& history,
                                                                const Tensor<T>& h0) const {
  sigma.check_conditioning_range();
  const Tensor<T> sigma_hat = Tensor<T>::Constant(1, 1, static_cast<T>(sigma.normalized()));
  return graph_.gradient(bind(frames, sigma_hat, history, h0), log_prob_node_, param_names_);
}

template <typename T>
subband::SubbandFrames SourceModel<T>::generate(std::size_t n_frames, NoiseLevelDb sigma, std::uint64_t seed) const {
  if (n_frames == 0) throw Error("generate needs at least one frame");
  const auto l = static_cast<Eigen::Index>(config_.context_frames);
  const auto c = static_cast<Eigen::Index>(config_.channels);
  const RowVector<T> cond = condition(sigma);
  Tensor<T> context = Tensor<T>::Zero(l, c);
  RowVector<T> state = RowVector<T>::Zero(static_cast<Eigen::Index>(config_.hidden_dim));
  Rng rng = make_rng(seed, "generate");

  subband::SubbandFrames out;
  out.coeffs.resize(static_cast<Eigen::Index>(n_frames), c);
  out.source_length = n_frames * config_.channels;
  for (std::size_t n = 0; n < n_frames; ++n) {
    auto pred = predict_frame(context, state, cond);
    RowVector<T> frame(c);
    for (Eigen::Index k = 0; k < c; ++k) {
      const double u = open_uniform(rng);
      frame[k] = pred.params.mu[k] + pred.params.s[k] * static_cast<T>(std::log(u) - std::log1p(-u));
    }
    out.coeffs.row(static_cast<Eigen::Index>(n)) = frame.template cast<double>();
    if (l > 1) context.topRows(l - 1) = context.bottomRows(l - 1).eval();
    context.row(l - 1) = frame;
    state = std::move(pred.state);
  }
  return out;
}

template class SourceModel<float>;
template class SourceModel<double>;

}  // namespace dpss::srcmodel
