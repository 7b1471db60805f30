#pragma once

// JSON job configuration. Every problem in a document (unknown keys, wrong
// types, invalid values) is collected and reported together.

#include "dpss/common.hpp"
#include "dpss/sampler.hpp"
#include "dpss/srcmodel.hpp"
#include "dpss/synth.hpp"
#include "dpss/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace dpss::config {

using Json = nlohmann::json;

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

// Parses a file; an empty path yields an empty object.
Json load_json(const std::filesystem::path& path);

struct SynthJob {
  synth::SynthSpec spec;
};

struct TrainJob {
  trainer::DatasetSpec dataset;
  srcmodel::ModelConfig model;
  trainer::TrainConfig train;
};

struct GenerateJob {
  std::filesystem::path checkpoint;
  double seconds = 1.0;
  double sigma_db = -90.0;
};

struct SeparateJob {
  std::filesystem::path mix;
  std::vector<std::filesystem::path> checkpoints;
  sampler::MixWeights weights;
  sampler::ScheduleConfig schedule;
  std::size_t score_segment_frames = sampler::kDefaultScoreSegmentFrames;
};

struct EvaluateItem {
  std::string id;
  std::filesystem::path mix;
  std::vector<std::filesystem::path> refs;
  std::vector<std::filesystem::path> estimates;
};

struct EvaluateJob {
  std::string method = "dpss";
  std::vector<std::string> labels{"source0", "source1"};
  sampler::MixWeights weights;
  std::vector<EvaluateItem> items;
  std::vector<std::string> baselines;  // "irm", "do-nothing"
  bool irm_power_ratio = false;
};

// Relative paths are resolved against base_dir (the config file's directory).
SynthJob parse_synth_job(const Json& j, std::uint64_t seed);
TrainJob parse_train_job(const Json& j, std::uint64_t seed, int precision, const std::filesystem::path& base_dir);
GenerateJob parse_generate_job(const Json& j, const std::filesystem::path& base_dir);
SeparateJob parse_separate_job(const Json& j, std::uint64_t seed, const std::filesystem::path& base_dir);
EvaluateJob parse_evaluate_job(const Json& j, const std::filesystem::path& base_dir);

}  // namespace dpss::config
