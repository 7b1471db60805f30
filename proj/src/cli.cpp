#include "dpss/cli.hpp"

#include "dpss/config.hpp"
#include "dpss/evalkit.hpp"
#include "dpss/parallel.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>

namespace dpss::cli {

namespace {

using config::Json;

std::filesystem::path base_dir(const CommonOptions& o) {
  return o.config.empty() ? std::filesystem::path() : o.config.parent_path();
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error("cannot create output directory " + dir.string());
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

void cmd_synth_data(const CommonOptions& o) {
  const auto job = config::parse_synth_job(config::load_json(o.config), o.seed);
  const auto m = synth::write_dataset(o.output, job.spec);
  std::cout << Json{{"command", "synth-data"}, {"items", m.items.size()}, {"output", o.output.string()}}.dump()
            << "\n";
}

void cmd_train(const CommonOptions& o) {
  const auto job = config::parse_train_job(config::load_json(o.config), o.seed, o.precision, base_dir(o));
  ensure_dir(o.output);
  const auto data = trainer::load_dataset(job.dataset);
  auto log = open_out(o.output / "train_log.jsonl");
  trainer::TrainHooks hooks;
  hooks.checkpoint = o.output / "model.ckpt";
  hooks.on_record = [&log](const trainer::LogRecord& r) {
    log << Json{{"iter", r.iter},
                {"lr", r.lr},
                {"train_nll", finite_or_null(r.train_nll)},
                {"val_nll", r.val_nll ? finite_or_null(*r.val_nll) : Json(nullptr)}}
               .dump()
        << "\n";
  };
  const auto result = trainer::train(data, job.model, job.train, hooks);
  srcmodel::save_checkpoint(o.output / "final.ckpt", result.final);
  if (!log) throw Error("failed writing the training log");
  std::cout << Json{{"command", "train"},
                    {"checkpoint", (o.output / "model.ckpt").string()},
                    {"parameters", result.final.parameter_count()},
                    {"initial_val_nll", finite_or_null(result.initial_val_nll)},
                    {"best_val_nll", finite_or_null(result.best_val_nll)}}
                   .dump()
            << "\n";
}

void cmd_generate(const CommonOptions& o) {
  const auto job = config::parse_generate_job(config::load_json(o.config), base_dir(o));
  const auto params = srcmodel::load_checkpoint(job.checkpoint);
  const int rate = 16000;
  const auto samples = static_cast<std::size_t>(std::llround(job.seconds * rate));
  const std::size_t c = params.config.channels;
  const std::size_t frames = (samples + c - 1) / c;
  subband::SubbandFrames x;
  if (o.precision == 64) x = srcmodel::SourceModel<double>(params).generate(frames, {job.sigma_db}, o.seed);
  else if (o.precision == 32) x = srcmodel::SourceModel<float>(params).generate(frames, {job.sigma_db}, o.seed);
  else throw Error("precision must be 32 or 64");
  auto w = subband::FilterBank(c).synthesize(x, rate);
  w.samples.resize(samples);
  ensure_dir(o.output);
  write_wav(o.output / "generated.wav", w, SampleFormat::float32);
  std::cout << Json{{"command", "generate"}, {"output", (o.output / "generated.wav").string()}, {"samples", samples}}.dump()
            << "\n";
}

void cmd_separate(const CommonOptions& o) {
  const auto job = config::parse_separate_job(config::load_json(o.config), o.seed, base_dir(o));
  const auto mix = read_wav(job.mix);
  std::vector<std::unique_ptr<sampler::ScoreProvider>> owned;
  std::vector<const sampler::ScoreProvider*> scores;
  for (const auto& path : job.checkpoints) {
    owned.push_back(sampler::make_model_score(srcmodel::load_checkpoint(path), o.precision, job.score_segment_frames));
    scores.push_back(owned.back().get());
  }
  ensure_dir(o.output);
  auto metrics = open_out(o.output / "metrics.jsonl");
  const auto est = sampler::separate(mix, scores, job.weights, job.schedule, [&metrics](const sampler::IterationMetrics& m) {
    metrics << Json{{"i", m.iter}, {"sigma_db", m.sigma_db}, {"mix_consistency_db", m.mix_consistency_db},
                    {"score_norms", m.score_norms}}
                   .dump()
            << "\n";
  });
  Json files = Json::array();
  for (std::size_t s = 0; s < est.size(); ++s) {
    const auto path = o.output / ("estimate_" + std::to_string(s) + ".wav");
    write_wav(path, est[s], SampleFormat::float32);
    files.push_back(path.string());
  }
  std::cout << Json{{"command", "separate"},
                    {"estimates", files},
                    {"mix_consistency_db", evalkit::mix_consistency(est, mix, job.weights)}}
                   .dump()
            << "\n";
}

void cmd_evaluate(const CommonOptions& o) {
  const auto job = config::parse_evaluate_job(config::load_json(o.config), base_dir(o));
  std::vector<evalkit::EvalItem> method, irm, nothing;
  for (const auto& it : job.items) {
    evalkit::EvalItem e;
    e.id = it.id;
    e.mix = read_wav(it.mix);
    for (const auto& r : it.refs) e.refs.push_back(read_wav(r));
    for (const auto& r : it.estimates) e.estimates.push_back(read_wav(r));
    if (std::count(job.baselines.begin(), job.baselines.end(), "irm")) {
      evalkit::IrmOptions opts;
      opts.power_ratio = job.irm_power_ratio;
      evalkit::EvalItem b = e;
      b.estimates = evalkit::irm_separate(e.mix, e.refs, opts).estimates;
      irm.push_back(std::move(b));
    }
    if (std::count(job.baselines.begin(), job.baselines.end(), "do-nothing")) {
      evalkit::EvalItem b = e;
      b.estimates.clear();
      for (std::size_t s = 0; s < job.weights.size(); ++s) {
        Waveform w = e.mix;
        for (double& v : w.samples) v *= job.weights.a[s] / job.weights.norm2();
        b.estimates.push_back(std::move(w));
      }
      nothing.push_back(std::move(b));
    }
    method.push_back(std::move(e));
  }
  std::vector<evalkit::EvalReport> reports;
  if (job.method != "none") reports.push_back(evalkit::evaluate(job.method, job.labels, method, job.weights));
  if (!irm.empty()) reports.push_back(evalkit::evaluate("irm", job.labels, irm, job.weights));
  if (!nothing.empty()) reports.push_back(evalkit::evaluate("do-nothing", job.labels, nothing, job.weights));
  if (reports.empty()) throw Error("nothing to evaluate: method is \"none\" and no baselines were requested");
  ensure_dir(o.output);
  auto jsonl = open_out(o.output / "report.jsonl");
  for (const auto& r : reports) jsonl << evalkit::report_jsonl(r);
  const auto table = evalkit::report_table(reports);
  open_out(o.output / "report.txt") << table;
  std::cout << table;
}

int run(int argc, char** argv) {
  CLI::App app{"Generative source separation with noise-conditioned subband source models"};
  app.require_subcommand(1);
  CommonOptions opts;
  std::string command;
  struct Entry {
    const char* name;
    const char* help;
    void (*fn)(const CommonOptions&);
  };
  const Entry entries[] = {
      {"synth-data", "Write a synthetic dataset (WAV files and manifest.json)", cmd_synth_data},
      {"train", "Train a source model", cmd_train},
      {"generate", "Sample audio from a trained model", cmd_generate},
      {"separate", "Separate a mix with trained source models", cmd_separate},
      {"evaluate", "Score estimates against references", cmd_evaluate},
  };
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--config", opts.config, "JSON job configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "Global seed");
    sub->add_option("--precision", opts.precision, "Arithmetic precision in bits")->check(CLI::IsMember({32, 64}));
    sub->add_option("--output", opts.output, "Output directory");
    sub->callback([&command, name = e.name] { command = name; });
  }

  auto fail = [&](int code, const std::string& kind, const std::string& message, const std::vector<std::string>& problems) {
    Json err{{"command", command}, {"kind", kind}, {"message", message}};
    if (!problems.empty()) err["problems"] = problems;
    std::cerr << Json{{"error", err}}.dump() << "\n";
    return code;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "usage", e.what(), {});
  }
  try {
    for (const auto& e : entries)
      if (command == e.name) e.fn(opts);
    return 0;
  } catch (const config::ConfigError& e) {
    return fail(2, "config", e.what(), e.problems());
  } catch (const std::exception& e) {
    return fail(1, "runtime", e.what(), {});
  }
}

}  // namespace dpss::cli
