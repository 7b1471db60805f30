#include "doctest.h"

#include "dpss/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <set>

using namespace dpss;
using namespace dpss::trainer;

namespace {

srcmodel::ModelConfig tiny_model() {
  srcmodel::ModelConfig c;
  c.channels = 8;
  c.context_frames = 4;
  c.hidden_dim = 16;
  c.recurrent_state_dim = 16;
  c.mlp_layers = 2;
  c.rff_dim = 8;
  return c;
}

TrainConfig tiny_train(std::size_t iterations) {
  TrainConfig t;
  t.iterations = iterations;
  t.batch_size = 4;
  t.seq_seconds = 0.02;
  t.segments_per_file = 4;
  t.lr_start = 3e-3;
  t.lr_end = 3e-4;
  t.validation_interval = 50;
  t.validation_items = 4;
  t.precision = 64;
  t.seed = 17;
  return t;
}

Dataset tiny_data(std::uint64_t seed = 3) {
  synth::SynthSpec s;
  s.source = synth::SourceClass::gaussian_ar;
  s.count = 20;
  s.duration_seconds = 0.1;
  s.seed = seed;
  DatasetSpec d;
  d.synthetic = s;
  return load_dataset(d);
}

}  // namespace

TEST_CASE("corruption adds noise at the requested power") {
  subband::SubbandFrames x;
  x.coeffs = Matrix::Zero(1000, 1000);
  x.source_length = 1000 * 1000;
  for (double db : {0.0, -90.0, -37.0}) {
    const auto y = corrupt(x, {db}, 11);
    const double p = y.coeffs.squaredNorm() / static_cast<double>(y.coeffs.size());
    CHECK(std::abs(10.0 * std::log10(p) - db) < 0.1);
  }
  subband::SubbandFrames small;
  small.coeffs = Matrix::Constant(3, 4, 2.0);
  CHECK(corrupt(small, {-10.0}, 1).coeffs == corrupt(small, {-10.0}, 1).coeffs);
  CHECK(corrupt(small, {-10.0}, 1).coeffs != corrupt(small, {-10.0}, 2).coeffs);
}

TEST_CASE("cosine learning-rate schedule") {
  TrainConfig t;
  t.iterations = 1000;
  CHECK(cosine_lr(0, t) == doctest::Approx(1e-4).epsilon(1e-15));
  CHECK(cosine_lr(1000, t) == doctest::Approx(1e-6).epsilon(1e-12));
  CHECK(cosine_lr(500, t) == doctest::Approx(5.05e-5).epsilon(1e-12));
  for (std::size_t i = 1; i <= 1000; ++i) CHECK(cosine_lr(i, t) <= cosine_lr(i - 1, t));
  CHECK_THROWS_AS(cosine_lr(1001, t), Error);
}

TEST_CASE("item length adjustment") {
  Rng rng(1);
  const std::vector<double> x{1, 2, 3};
  CHECK(fit_length(x, 7, rng) == std::vector<double>{1, 2, 3, 1, 2, 3, 1});
  std::vector<double> long_item(100);
  for (std::size_t i = 0; i < 100; ++i) long_item[i] = static_cast<double>(i);
  std::set<double> starts;
  for (int k = 0; k < 20; ++k) {
    const auto cut = fit_length(long_item, 10, rng);
    REQUIRE(cut.size() == 10);
    for (std::size_t i = 1; i < 10; ++i) CHECK(cut[i] == cut[0] + static_cast<double>(i));
    starts.insert(cut[0]);
  }
  CHECK(starts.size() > 1);
  CHECK_THROWS_AS(fit_length({}, 4, rng), Error);
}

TEST_CASE("first Adam step moves each weight by the learning rate") {
  std::map<std::string, Matrix> p{{"w", Matrix::Constant(2, 2, 1.0)}};
  Matrix g(2, 2);
  g << 0.5, -2.0, 1e-3, 0.0;
  Adam adam;
  adam.step(p, {{"w", g}}, 0.1);
  // m_hat = g, v_hat = g^2 after bias correction.
  CHECK(p["w"](0, 0) == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)));
  CHECK(p["w"](0, 1) == doctest::Approx(1.0 + 0.1 * 2.0 / (2.0 + 1e-8)));
  CHECK(p["w"](1, 0) == doctest::Approx(1.0 - 0.1 * 1e-3 / (1e-3 + 1e-8)));
  CHECK(p["w"](1, 1) == 1.0);
  CHECK(adam.steps() == 1);
}

TEST_CASE("dataset splits are disjoint and reproducible") {
  const auto s = synth::assign_splits(200, 4);
  CHECK(s == synth::assign_splits(200, 4));
  CHECK(s != synth::assign_splits(200, 5));
  CHECK(std::count(s.begin(), s.end(), synth::Split::train) == 160);
  CHECK(std::count(s.begin(), s.end(), synth::Split::validation) == 20);
  CHECK(std::count(s.begin(), s.end(), synth::Split::test) == 20);
  const auto d = tiny_data();
  CHECK(d.train.size() == 16);
  CHECK(d.validation.size() == 2);
  CHECK(d.test.size() == 2);
  for (const auto& a : d.train)
    for (const auto& b : d.test) CHECK(a.samples != b.samples);
}

TEST_CASE("zero iterations return the initialization") {
  const auto data = tiny_data();
  const auto r = train(data, tiny_model(), tiny_train(0));
  const auto init = srcmodel::ModelParams::initialize(tiny_model(), 17);
  CHECK(r.final == init);
  CHECK(r.best == init);
  CHECK(r.log.size() == 1);
  CHECK(std::isfinite(r.initial_val_nll));
}

TEST_CASE("training is deterministic and lowers validation NLL") {
  const auto data = tiny_data();
  const auto path = std::filesystem::temp_directory_path() / "dpss_train_test.ckpt";
  TrainHooks hooks;
  hooks.checkpoint = path;
  const auto a = train(data, tiny_model(), tiny_train(200), hooks);
  const auto b = train(data, tiny_model(), tiny_train(200));
  REQUIRE(a.log.size() == 201);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    if (i > 0) CHECK(a.log[i].train_nll == b.log[i].train_nll);
    CHECK(a.log[i].val_nll.has_value() == b.log[i].val_nll.has_value());
  }
  CHECK(a.final == b.final);
  CHECK(a.best_val_nll < a.initial_val_nll);
  CHECK(srcmodel::load_checkpoint(path) == a.best);
  std::filesystem::remove(path);
  const double v = validation_nll(a.best, data.validation, tiny_train(0));
  CHECK(v == doctest::Approx(a.best_val_nll).epsilon(1e-12));
}

TEST_CASE("float training runs and reports finite losses") {
  auto cfg = tiny_train(20);
  cfg.precision = 32;
  const auto r = train(tiny_data(), tiny_model(), cfg);
  for (std::size_t i = 1; i < r.log.size(); ++i) CHECK(std::isfinite(r.log[i].train_nll));
}

TEST_CASE("non-finite data aborts with a diagnostic") {
  auto data = tiny_data();
  for (auto& w : data.train) w.samples[w.size() / 2] = std::nan("");
  try {
    train(data, tiny_model(), tiny_train(5));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
  }
}

TEST_CASE("configuration errors") {
  auto cfg = tiny_train(1);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(tiny_data(), tiny_model(), cfg), Error);
  cfg = tiny_train(1);
  cfg.noise_range_db = {-100.0, 0.0};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_train(1);
  cfg.precision = 16;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_THROWS_AS(load_dataset(DatasetSpec{}), Error);
  DatasetSpec missing;
  missing.directory = "/nonexistent/data";
  CHECK_THROWS_AS(load_dataset(missing), Error);
  Dataset empty;
  CHECK_THROWS_AS(train(empty, tiny_model(), tiny_train(1)), Error);
}
