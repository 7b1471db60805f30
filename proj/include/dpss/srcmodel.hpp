#pragma once

#include "dpss/common.hpp"
#include "dpss/diffgraph.hpp"
#include "dpss/subband.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

// Noise-level-conditioned autoregressive model over subband frames:
// log p(X~ | sigma) = sum_n log p(x~_n | X~_{<n}, sigma), each frame a product
// of independent per-channel logistics whose (mu, s) come from
//   causal conv over the last L frames + conditioning(sigma) -> GRU -> MLP.
namespace dpss::srcmodel {

inline constexpr double kMinNoiseDb = -90.0;
inline constexpr double kMaxNoiseDb = 0.0;
inline constexpr double kScaleFloor = 1e-6;
inline constexpr double kRffScale = 10.0;

// Noise power in dB; the amplitude is 10^(dB/20).
struct NoiseLevelDb {
  double value = kMinNoiseDb;

  double amplitude() const { return db_to_amplitude(value); }
  // Position of the level in the conditioning range, 0 at -90 dB, 1 at 0 dB.
  double normalized() const { return (value - kMinNoiseDb) / (kMaxNoiseDb - kMinNoiseDb); }
  // Throws Error outside [-90, 0] dB or when not finite.
  void check_conditioning_range() const;
};

struct ModelConfig {
  std::size_t context_frames = 10;
  std::size_t channels = 64;
  std::size_t hidden_dim = 1024;
  std::size_t mlp_layers = 4;
  std::size_t rff_dim = 64;
  std::size_t recurrent_state_dim = 1024;

  void validate() const;
  std::size_t output_size() const { return 2 * channels; }
  bool operator==(const ModelConfig&) const = default;
};

struct ModelParams {
  ModelConfig config;
  std::vector<double> rff_frequencies;  // rff_dim / 2 entries, fixed at init
  std::map<std::string, Matrix> tensors;

  static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);
  std::size_t parameter_count() const;
  // Throws Error if a tensor is missing or has the wrong shape.
  void validate() const;
  bool operator==(const ModelParams&) const = default;
};

// Expected name -> shape of every trainable tensor.
std::map<std::string, std::pair<std::size_t, std::size_t>> parameter_shapes(const ModelConfig& config);

// Binary checkpoint: "DPSSCKPT", u32 version, config, RFF frequencies, then
// named f64 tensors. Little-endian; round-trips bit-exactly.
std::vector<char> serialize(const ModelParams& params);
ModelParams deserialize(const std::vector<char>& bytes);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

template <typename T>
struct LogisticFrameParams {
  RowVector<T> mu;
  RowVector<T> s;
};

template <typename T>
struct FramePrediction {
  LogisticFrameParams<T> params;
  RowVector<T> state;
};

// Teacher-forced evaluation of a sequence.
template <typename T>
struct SequenceEvaluation {
  double log_prob = 0.0;
  Tensor<T> mu;      // N x C
  Tensor<T> scale;   // N x C
  Tensor<T> hidden;  // N x H, last row is the carried state
};

template <typename T>
class SourceModel {
 public:
  explicit SourceModel(const ModelParams& params);

  void set_params(const ModelParams& params);
  const ModelConfig& config() const { return config_; }
  const diffgraph::Graph& graph() const { return graph_; }
  const std::vector<std::string>& parameter_names() const { return param_names_; }

  // [sin(2 pi f_k sigma^), cos(2 pi f_k sigma^)] with sigma^ in [0, 1].
  RowVector<T> rff_embed(NoiseLevelDb sigma) const;
  // hidden_dim-long output of the conditioning MLP.
  RowVector<T> condition(NoiseLevelDb sigma) const;

  // One step: context holds the last L frames, oldest first.
  FramePrediction<T> predict_frame(const Tensor<T>& context, const RowVector<T>& state,
                                   const RowVector<T>& cond) const;

  // history: the L frames before frames (zeros at sequence start);
  // h0: recurrent state entering the first frame.
  SequenceEvaluation<T> evaluate(const Tensor<T>& frames, NoiseLevelDb sigma, const Tensor<T>* history = nullptr,
                                 const Tensor<T>* h0 = nullptr) const;

  double log_prob(const Matrix& frames, NoiseLevelDb sigma) const;
  // d log_prob / d frames, including the paths through later frames' context.
  // A nonzero segment_frames evaluates consecutive segments of that length with
  // history and state carried forward but not differentiated, as in training.
  Matrix score(const Matrix& frames, NoiseLevelDb sigma, std::size_t segment_frames = 0) const;
  // Same, and also returns the log probability.
  Matrix score(const Matrix& frames, NoiseLevelDb sigma, double& log_prob, std::size_t segment_frames = 0) const;

  // Gradient of the summed log probability with respect to every trainable
  // tensor, with carried history/state treated as constants.
  diffgraph::GradientResult<T> parameter_gradient(const Tensor<T>& frames, NoiseLevelDb sigma,
                                                  const Tensor<T>& history, const Tensor<T>& h0) const;

  // Ancestral sampling, x = mu + s * (ln u - ln(1 - u)).
  subband::SubbandFrames generate(std::size_t n_frames, NoiseLevelDb sigma, std::uint64_t seed) const;

 private:
  diffgraph::Bindings<T> bind(const Tensor<T>& frames, const Tensor<T>& sigma_hat, const Tensor<T>& history,
                              const Tensor<T>& h0) const;
  void build_graph();

  ModelConfig config_;
  std::map<std::string, Tensor<T>> tensors_;
  Tensor<T> rff_weight_;  // rff_dim/2 x 1, entries 2 pi f_k
  std::vector<std::string> param_names_;
  diffgraph::Graph graph_;
  diffgraph::NodeId log_prob_node_ = 0;
};

extern template class SourceModel<float>;
extern template class SourceModel<double>;

}  // namespace dpss::srcmodel
