#include "doctest.h"

#include "dpss/cli.hpp"
#include "dpss/config.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace dpss;
namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dpss");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh(const std::string& name) {
  auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const char* kTinyTrain = R"({
  "dataset": {"synthetic": {"source": "gaussian-ar", "count": 10, "duration_seconds": 0.1}},
  "model": {"channels": 8, "context_frames": 2, "hidden_dim": 8, "mlp_layers": 2, "rff_dim": 4},
  "train": {"iterations": 4, "batch_size": 2, "seq_seconds": 0.01, "segments_per_file": 2,
            "validation_interval": 2, "validation_items": 1}
})";

}  // namespace

TEST_CASE("synth-data is reproducible and handles empty datasets") {
  const auto dir = fresh("dpss_cli_synth");
  write_text(dir / "s.json", R"({"source": "harmonic-tones", "count": 4, "duration_seconds": 0.1})");
  REQUIRE(run_cli({"synth-data", "--config", (dir / "s.json").string(), "--seed", "5", "--output", (dir / "a").string()}) == 0);
  REQUIRE(run_cli({"synth-data", "--config", (dir / "s.json").string(), "--seed", "5", "--output", (dir / "b").string()}) == 0);
  for (int i = 0; i < 4; ++i) {
    const std::string f = "item_000" + std::to_string(i) + ".wav";
    CHECK(read_bytes(dir / "a" / f) == read_bytes(dir / "b" / f));
  }
  CHECK(read_bytes(dir / "a" / "manifest.json") == read_bytes(dir / "b" / "manifest.json"));

  write_text(dir / "z.json", R"({"count": 0})");
  REQUIRE(run_cli({"synth-data", "--config", (dir / "z.json").string(), "--output", (dir / "z").string()}) == 0);
  CHECK(synth::read_manifest(dir / "z").items.empty());
  fs::remove_all(dir);
}

TEST_CASE("configuration errors list every offending key") {
  const config::Json j = config::Json::parse(R"({
    "dataset": {"synthetic": {"source": "gaussian-ar", "colour": 1}},
    "model": {"channels": 12, "hidden": 3},
    "train": {"iterations": -1},
    "typo": true
  })");
  try {
    config::parse_train_job(j, 0, 64, {});
    FAIL("expected ConfigError");
  } catch (const config::ConfigError& e) {
    const auto& p = e.problems();
    auto has = [&](const std::string& needle) {
      return std::any_of(p.begin(), p.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
    };
    CHECK(has("dataset.synthetic.colour: unknown key"));
    CHECK(has("model.hidden: unknown key"));
    CHECK(has("model:"));
    CHECK(has("train.iterations"));
    CHECK(has("typo: unknown key"));
  }
  CHECK_THROWS_AS(config::parse_separate_job(config::Json::parse(R"({"mix": "m.wav"})"), 0, {}), config::ConfigError);
  const auto sep = config::parse_separate_job(
      config::Json::parse(R"({"mix": "m.wav", "checkpoints": ["a", "b"], "score_segment_frames": 40})"), 0, {});
  CHECK(sep.score_segment_frames == 40);
  CHECK(config::parse_separate_job(config::Json::parse(R"({"mix": "m.wav", "checkpoints": ["a", "b"]})"), 0, {})
            .score_segment_frames == sampler::kDefaultScoreSegmentFrames);
  CHECK_THROWS_AS(config::parse_separate_job(config::Json::parse(
                      R"({"mix": "m.wav", "checkpoints": ["a", "b"], "score_segment_frames": -3})"), 0, {}),
                  config::ConfigError);
  CHECK_THROWS_AS(config::parse_generate_job(config::Json::parse(R"({"checkpoint": "c", "sigma_db": 3})"), {}),
                  config::ConfigError);

  const auto dir = fresh("dpss_cli_bad");
  write_text(dir / "bad.json", R"({"nope": 1})");
  CHECK(run_cli({"synth-data", "--config", (dir / "bad.json").string(), "--output", (dir / "o").string()}) == 2);
  write_text(dir / "broken.json", "{");
  CHECK(run_cli({"synth-data", "--config", (dir / "broken.json").string()}) == 2);
  CHECK(run_cli({"train", "--precision", "16"}) == 2);
  CHECK(run_cli({}) == 2);
  write_text(dir / "g.json", R"({"checkpoint": "missing.ckpt"})");
  CHECK(run_cli({"generate", "--config", (dir / "g.json").string(), "--output", (dir / "o").string()}) == 1);
  fs::remove_all(dir);
}

TEST_CASE("train, generate, separate and evaluate end to end") {
  const auto dir = fresh("dpss_cli_pipeline");
  write_text(dir / "train.json", kTinyTrain);
  REQUIRE(run_cli({"train", "--config", (dir / "train.json").string(), "--output", (dir / "m").string(), "--seed", "2"}) == 0);
  CHECK(fs::exists(dir / "m" / "model.ckpt"));
  CHECK(fs::exists(dir / "m" / "final.ckpt"));
  const auto log = read_bytes(dir / "m" / "train_log.jsonl");
  CHECK(std::count(log.begin(), log.end(), '\n') == 5);

  write_text(dir / "gen.json", R"({"checkpoint": "m/model.ckpt", "seconds": 0.05, "sigma_db": -60})");
  REQUIRE(run_cli({"generate", "--config", (dir / "gen.json").string(), "--output", (dir / "g1").string(), "--seed", "4"}) == 0);
  REQUIRE(run_cli({"generate", "--config", (dir / "gen.json").string(), "--output", (dir / "g2").string(), "--seed", "4"}) == 0);
  CHECK(read_bytes(dir / "g1" / "generated.wav") == read_bytes(dir / "g2" / "generated.wav"));
  CHECK(read_wav(dir / "g1" / "generated.wav").size() == 800);

  // Mix of two references.
  Waveform r0 = read_wav(dir / "g1" / "generated.wav"), r1 = r0;
  for (std::size_t i = 0; i < r1.size(); ++i) r1.samples[i] = 0.01 * std::sin(0.3 * static_cast<double>(i));
  Waveform mix = r0;
  for (std::size_t i = 0; i < mix.size(); ++i) mix.samples[i] += r1.samples[i];
  write_wav(dir / "r0.wav", r0, SampleFormat::float32);
  write_wav(dir / "r1.wav", r1, SampleFormat::float32);
  write_wav(dir / "mix.wav", mix, SampleFormat::float32);

  write_text(dir / "sep.json", R"({"mix": "mix.wav", "checkpoints": ["m/model.ckpt", "m/final.ckpt"],
                                    "schedule": {"iterations": 20}})");
  REQUIRE(run_cli({"separate", "--config", (dir / "sep.json").string(), "--output", (dir / "s").string()}) == 0);
  CHECK(read_wav(dir / "s" / "estimate_0.wav").size() == mix.size());
  CHECK(read_wav(dir / "s" / "estimate_1.wav").size() == mix.size());
  const auto metrics = read_bytes(dir / "s" / "metrics.jsonl");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 20);

  write_text(dir / "eval.json", R"({"labels": ["a", "b"], "baselines": ["irm", "do-nothing"],
    "items": [{"id": "x", "mix": "mix.wav", "refs": ["r0.wav", "r1.wav"],
               "estimates": ["s/estimate_0.wav", "s/estimate_1.wav"]}]})");
  REQUIRE(run_cli({"evaluate", "--config", (dir / "eval.json").string(), "--output", (dir / "e").string()}) == 0);
  const auto report = read_bytes(dir / "e" / "report.jsonl");
  CHECK(std::count(report.begin(), report.end(), '\n') == 9);
  const auto table = read_bytes(dir / "e" / "report.txt");
  CHECK(table.find("do-nothing") != std::string::npos);
  CHECK(table.find("irm") != std::string::npos);
  fs::remove_all(dir);
}
