#include "dpss/config.hpp"

#include <fstream>
#include <set>

namespace dpss::config {

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& p : v) s += (s.empty() ? "" : "; ") + p;
  return s;
}

using Problems = std::vector<std::string>;

// One JSON object being read; keys that are never asked for are reported as
// unknown when the section is closed.
class Section {
 public:
  Section(const Json* j, std::string path, Problems& problems) : j_(j), path_(std::move(path)), problems_(problems) {
    if (j_ && !j_->is_object()) {
      problems_.push_back(where() + ": expected an object");
      j_ = nullptr;
    }
  }
  Section(const Section&) = delete;
  ~Section() {
    if (!j_) return;
    for (const auto& [key, value] : j_->items())
      if (!seen_.count(key)) problems_.push_back(key_path(key) + ": unknown key");
  }

  bool has(const std::string& key) const { return j_ && j_->contains(key); }

  const Json* raw(const std::string& key) {
    seen_.insert(key);
    if (!j_) return nullptr;
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }

  Section child(const std::string& key) { return Section(raw(key), key_path(key), problems_); }

  void read(const std::string& key, double& out) {
    if (const Json* v = raw(key)) {
      if (v->is_number()) out = v->get<double>();
      else bad(key, "a number");
    }
  }
  void read(const std::string& key, std::size_t& out) {
    if (const Json* v = raw(key)) {
      if (v->is_number_unsigned()) out = v->get<std::size_t>();
      else if (v->is_number_integer() && v->get<long long>() >= 0) out = static_cast<std::size_t>(v->get<long long>());
      else bad(key, "a non-negative integer");
    }
  }
  void read(const std::string& key, int& out) {
    if (const Json* v = raw(key)) {
      if (v->is_number_integer()) out = v->get<int>();
      else bad(key, "an integer");
    }
  }
  void read(const std::string& key, bool& out) {
    if (const Json* v = raw(key)) {
      if (v->is_boolean()) out = v->get<bool>();
      else bad(key, "true or false");
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const Json* v = raw(key)) {
      if (v->is_string()) out = v->get<std::string>();
      else bad(key, "a string");
    }
  }
  void read(const std::string& key, std::vector<double>& out) {
    if (const Json* v = raw(key)) {
      if (!v->is_array() || !std::all_of(v->begin(), v->end(), [](const Json& e) { return e.is_number(); })) {
        bad(key, "an array of numbers");
        return;
      }
      out = v->get<std::vector<double>>();
    }
  }
  void read(const std::string& key, std::array<double, 2>& out) {
    if (const Json* v = raw(key)) {
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
        bad(key, "a [low, high] pair of numbers");
        return;
      }
      out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
    }
  }
  void read(const std::string& key, std::vector<std::string>& out) {
    if (const Json* v = raw(key)) {
      if (!v->is_array() || !std::all_of(v->begin(), v->end(), [](const Json& e) { return e.is_string(); })) {
        bad(key, "an array of strings");
        return;
      }
      out = v->get<std::vector<std::string>>();
    }
  }
  void read_path(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base) {
    std::string s;
    if (!has(key)) {
      raw(key);
      return;
    }
    read(key, s);
    if (!s.empty()) out = resolve(s, base);
  }
  void require(const std::string& key) {
    if (!has(key)) problems_.push_back(key_path(key) + ": required key is missing");
  }
  // Runs a validator and files its message under this section.
  template <typename F>
  void check(F&& f) {
    try {
      f();
    } catch (const Error& e) {
      problems_.push_back(where() + ": " + e.what());
    }
  }
  template <typename F>
  void check_key(const std::string& key, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      problems_.push_back(key_path(key) + ": " + e.what());
    }
  }

  static std::filesystem::path resolve(const std::string& s, const std::filesystem::path& base) {
    const std::filesystem::path p(s);
    return p.is_absolute() || base.empty() ? p : base / p;
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "<root>" : path_; }
  Problems& problems() { return problems_; }

 private:
  void bad(const std::string& key, const char* what) { problems_.push_back(key_path(key) + ": expected " + what); }

  const Json* j_;
  std::string path_;
  Problems& problems_;
  std::set<std::string> seen_;
};

void throw_if(const Problems& p) {
  if (!p.empty()) throw ConfigError(p);
}

void read_synth(Section& s, synth::SynthSpec& spec) {
  std::string source = synth::to_string(spec.source);
  s.read("source", source);
  s.check_key("source", [&] { spec.source = synth::parse_source_class(source); });
  s.read("count", spec.count);
  s.read("duration_seconds", spec.duration_seconds);
  s.read("sample_rate", spec.sample_rate);
  s.read("fundamentals", spec.fundamentals);
  s.read("note_seconds_min", spec.note_seconds_min);
  s.read("note_seconds_max", spec.note_seconds_max);
  s.read("center_hz_min", spec.center_hz_min);
  s.read("center_hz_max", spec.center_hz_max);
  s.read("q", spec.q);
  s.check([&] { spec.validate(); });
}

void read_model(Section& s, srcmodel::ModelConfig& m) {
  s.read("context_frames", m.context_frames);
  s.read("channels", m.channels);
  s.read("hidden_dim", m.hidden_dim);
  m.recurrent_state_dim = m.hidden_dim;
  s.read("mlp_layers", m.mlp_layers);
  s.read("rff_dim", m.rff_dim);
  s.read("recurrent_state_dim", m.recurrent_state_dim);
  s.check([&] {
    m.validate();
    subband::design_prototype(m.channels, 10);
  });
}

void read_train(Section& s, trainer::TrainConfig& t) {
  s.read("iterations", t.iterations);
  s.read("batch_size", t.batch_size);
  s.read("seq_seconds", t.seq_seconds);
  s.read("lr_start", t.lr_start);
  s.read("lr_end", t.lr_end);
  s.read("noise_range_db", t.noise_range_db);
  s.read("segments_per_file", t.segments_per_file);
  s.read("level_range_dbfs", t.level_range_dbfs);
  s.read("validation_interval", t.validation_interval);
  s.read("validation_items", t.validation_items);
  s.check([&] { t.validate(); });
}

void read_schedule(Section& s, sampler::ScheduleConfig& c) {
  std::string variant = c.variant == sampler::Variant::cas ? "cas" : "als";
  s.read("variant", variant);
  if (variant == "cas") c.variant = sampler::Variant::cas;
  else if (variant == "als") c.variant = sampler::Variant::als;
  else s.problems().push_back(s.key_path("variant") + ": expected \"cas\" or \"als\"");
  s.read("sigma_start_db", c.sigma_start_db);
  s.read("sigma_end_db", c.sigma_end_db);
  s.read("iterations", c.iterations);
  s.read("eta", c.eta);
  s.read("eps_eta", c.eps_eta);
  s.check([&] { c.validate(); });
}

void read_weights(Section& s, sampler::MixWeights& w) {
  s.read("weights", w.a);
  s.check([&] { w.validate(); });
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : Error("invalid configuration: " + join(problems)), problems_(std::move(problems)) {}

Json load_json(const std::filesystem::path& path) {
  if (path.empty()) return Json::object();
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError({path.string() + ": " + e.what()});
  }
}

SynthJob parse_synth_job(const Json& j, std::uint64_t seed) {
  Problems p;
  SynthJob job;
  job.spec.seed = seed;
  {
    Section root(&j, "", p);
    read_synth(root, job.spec);
  }
  throw_if(p);
  return job;
}

TrainJob parse_train_job(const Json& j, std::uint64_t seed, int precision, const std::filesystem::path& base) {
  Problems p;
  TrainJob job;
  job.train.seed = seed;
  job.train.precision = precision;
  job.dataset.seed = seed;
  {
    Section root(&j, "", p);
    root.require("dataset");
    {
      Section ds = root.child("dataset");
      std::filesystem::path dir;
      ds.read_path("directory", dir, base);
      if (!dir.empty()) job.dataset.directory = dir;
      if (ds.has("synthetic")) {
        synth::SynthSpec spec;
        spec.seed = seed;
        Section syn = ds.child("synthetic");
        read_synth(syn, spec);
        job.dataset.synthetic = spec;
      } else {
        ds.raw("synthetic");
      }
      if (root.has("dataset") && job.dataset.directory.has_value() == job.dataset.synthetic.has_value())
        p.push_back("dataset: give exactly one of \"directory\" or \"synthetic\"");
    }
    {
      Section m = root.child("model");
      read_model(m, job.model);
    }
    {
      Section t = root.child("train");
      read_train(t, job.train);
    }
  }
  throw_if(p);
  return job;
}

GenerateJob parse_generate_job(const Json& j, const std::filesystem::path& base) {
  Problems p;
  GenerateJob job;
  {
    Section root(&j, "", p);
    root.require("checkpoint");
    root.read_path("checkpoint", job.checkpoint, base);
    root.read("seconds", job.seconds);
    root.read("sigma_db", job.sigma_db);
    if (!(job.seconds > 0.0)) p.push_back("seconds: must be positive");
    root.check_key("sigma_db", [&] { srcmodel::NoiseLevelDb{job.sigma_db}.check_conditioning_range(); });
  }
  throw_if(p);
  return job;
}

SeparateJob parse_separate_job(const Json& j, std::uint64_t seed, const std::filesystem::path& base) {
  Problems p;
  SeparateJob job;
  job.schedule.seed = seed;
  {
    Section root(&j, "", p);
    root.require("mix");
    root.require("checkpoints");
    root.read_path("mix", job.mix, base);
    std::vector<std::string> ckpts;
    root.read("checkpoints", ckpts);
    for (const auto& c : ckpts) job.checkpoints.push_back(Section::resolve(c, base));
    if (root.has("checkpoints") && job.checkpoints.size() < 2) p.push_back("checkpoints: need at least two");
    job.weights.a.assign(std::max<std::size_t>(job.checkpoints.size(), 2), 1.0);
    read_weights(root, job.weights);
    if (job.weights.size() != job.checkpoints.size() && job.checkpoints.size() >= 2)
      p.push_back("weights: need one weight per checkpoint");
    root.read("score_segment_frames", job.score_segment_frames);
    Section s = root.child("schedule");
    read_schedule(s, job.schedule);
  }
  throw_if(p);
  return job;
}

EvaluateJob parse_evaluate_job(const Json& j, const std::filesystem::path& base) {
  Problems p;
  EvaluateJob job;
  {
    Section root(&j, "", p);
    root.require("items");
    root.read("method", job.method);
    root.read("labels", job.labels);
    job.weights.a.assign(job.labels.size(), 1.0);
    read_weights(root, job.weights);
    if (job.weights.size() != job.labels.size()) p.push_back("weights: need one weight per label");
    root.read("baselines", job.baselines);
    for (const auto& b : job.baselines)
      if (b != "irm" && b != "do-nothing") p.push_back("baselines: unknown baseline '" + b + "'");
    root.read("irm_power_ratio", job.irm_power_ratio);
    if (const Json* items = root.raw("items")) {
      if (!items->is_array()) p.push_back("items: expected an array");
      else
        for (std::size_t i = 0; i < items->size(); ++i) {
          Section it(&(*items)[i], "items[" + std::to_string(i) + "]", p);
          EvaluateItem e;
          e.id = "item" + std::to_string(i);
          it.read("id", e.id);
          it.require("mix");
          it.require("refs");
          it.read_path("mix", e.mix, base);
          std::vector<std::string> refs, ests;
          it.read("refs", refs);
          it.read("estimates", ests);
          for (const auto& r : refs) e.refs.push_back(Section::resolve(r, base));
          for (const auto& r : ests) e.estimates.push_back(Section::resolve(r, base));
          if (e.refs.size() != job.labels.size())
            p.push_back(it.key_path("refs") + ": need one reference per label");
          if (!ests.empty() && e.estimates.size() != job.labels.size())
            p.push_back(it.key_path("estimates") + ": need one estimate per label");
          job.items.push_back(std::move(e));
        }
    }
    const bool needs_estimates = std::any_of(job.items.begin(), job.items.end(), [](const EvaluateItem& e) { return e.estimates.empty(); });
    if (needs_estimates && !job.items.empty() && job.method != "none")
      p.push_back("items: every item needs \"estimates\" unless method is \"none\"");
  }
  throw_if(p);
  return job;
}

}  // namespace dpss::config
