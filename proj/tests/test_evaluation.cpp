#include <doctest.h>

#include "check.hpp"
#include "emgkin/evaluation.hpp"
#include "emgkin/synth.hpp"

using namespace emgkin;

TEST_CASE("r squared reference values") {
  const std::vector<double> a{1.0, 4.0, -2.0, 3.5, 0.0};
  CHECK(std::abs(r_squared(a, a) - 1.0) < 1e-12);
  CHECK(std::abs(r_squared(a, std::vector<double>(5, 2.0)) - 0.0) < 1e-12);
  std::vector<double> shifted(a);
  for (auto& v : shifted) v += 5.0;
  CHECK(std::abs(r_squared(a, shifted) - 1.0) < 1e-12);
  CHECK_THROWS_AS(r_squared(std::vector<double>(4, 1.0), std::span(a).first(4)), UndefinedMetricError);
  CHECK_THROWS_AS(r_squared(a, std::span(a).first(4)), DimensionError);
  CHECK_THROWS_AS(r_squared(std::vector<double>{1.0}, std::vector<double>{1.0}), UndefinedMetricError);
}

TEST_CASE("r squared is affine equivariant and bounded by one") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> alpha(30), y(30);
    for (std::size_t i = 0; i < 30; ++i) {
      alpha[i] = n(rng);
      y[i] = alpha[i] + 0.5 * n(rng);
    }
    const double a = (trial % 2 ? -1.0 : 1.0) * (0.1 + std::abs(n(rng)) * 3.0), b = n(rng) * 10.0;
    std::vector<double> alpha2(30), y2(30);
    for (std::size_t i = 0; i < 30; ++i) {
      alpha2[i] = a * alpha[i] + b;
      y2[i] = a * y[i] + b;
    }
    const double r = r_squared(alpha, y);
    CHECK(std::abs(r - r_squared(alpha2, y2)) < 1e-12);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("intra-session folds") {
  SemgRecording rec;
  rec.emg = Tensor64({4000, 6}, 0.0);
  rec.angles = Tensor64({391, 1}, 0.0);
  CHECK(fold_boundaries(4000, 4) == std::vector<std::size_t>{0, 1000, 2000, 3000, 4000});
  const auto [train, test] = split_session(rec);
  CHECK(train.emg_samples() == 3000);
  CHECK(test.emg_samples() == 1000);
  CHECK(test.emg_t0 == rec.emg_time(3000));
  CHECK(train.emg_samples() + test.emg_samples() == rec.emg_samples());
  CHECK(train.emg_time(train.emg_samples() - 1) < test.emg_t0);
  SplitPlan inter{SplitMode::inter, 4, "A", "B"};
  CHECK_THROWS_AS(split_session(rec, inter), UsageError);
  CHECK(split_label(inter) == "inter:A->B");
}

TEST_CASE("the test fold is filtered on its own") {
  SynthConfig sc;
  sc.duration_s = 8.0;
  const auto rec = generate(sc);
  const auto [train, test] = split_session(rec);
  const auto standalone = apply_filter_chain(test);
  const auto from_full = apply_filter_chain(rec).slice_samples(rec.emg_samples() * 3 / 4, rec.emg_samples());
  // Filter start-up transient makes the first samples differ.
  CHECK(std::abs(standalone.emg(0, 0) - from_full.emg(0, 0)) > 1e-6);
  // Test-fold preprocessing through a fitted Preprocessor never sees training samples.
  TrainingConfig cfg;
  const Preprocessor prep = fit_preprocessor(cfg, train);
  const auto windows = prep.windows(test);
  const auto expected = segment_windows(apply_normalizer(prep.norm, standalone), prep.window, prep.hop);
  REQUIRE(windows.size() == expected.size());
  CHECK(windows.front().samples == expected.front().samples);
}

TEST_CASE("no test window overlaps a training sample") {
  SynthConfig sc;
  sc.duration_s = 8.0;
  const auto rec = generate(sc);
  const auto [train, test] = split_session(rec);
  const Preprocessor prep = fit_preprocessor(TrainingConfig{}, train);
  for (const auto& w : prep.windows(test)) {
    CHECK(test.emg_time(w.start) >= test.emg_t0);
    CHECK(test.emg_time(w.start) > train.emg_time(train.emg_samples() - 1));
  }
}

TEST_CASE("degenerate training targets are reported") {
  SynthConfig sc;
  sc.duration_s = 8.0;
  auto rec = generate(sc);
  rec.angles.fill(10.0);
  TrainingConfig cfg = TrainingConfig::desk();
  cfg.cnn.epochs = 1;
  cfg.lstm.epochs = 1;
  CHECK_THROWS_AS(train_hybrid(cfg, split_session(rec).first), UndefinedMetricError);
}

TEST_CASE("score_trajectory names DoFs by protocol") {
  Trajectory t;
  t.time = {0.0, 1.0, 2.0};
  t.truth = Tensor64::matrix({{1, 2, 3}, {2, 1, 0}, {3, 3, 1}});
  t.pred = t.truth;
  const auto s = score_trajectory(t, Protocol::P4);
  REQUIRE(s.size() == 3);
  CHECK(s[0].name == "fe");
  CHECK(s[1].name == "ps");
  CHECK(s[2].name == "ru");
  CHECK(s[2].r2 == 1.0);
  CHECK_THROWS_AS(score_trajectory(t, Protocol::P1), DimensionError);
}

TEST_CASE("train and test protocols must agree") {
  SynthConfig a;
  a.duration_s = 6.0;
  SynthConfig b = a;
  b.protocol = Protocol::P2;
  TrainingConfig cfg = TrainingConfig::desk();
  cfg.cnn.epochs = 1;
  cfg.lstm.epochs = 1;
  CHECK_THROWS_AS(run_evaluation(cfg, generate(a), generate(b), "inter:A->B"), ConfigError);
  // The model takes its protocol from the training data, not the config.
  cfg.protocol = Protocol::P3;
  CHECK(train_hybrid(cfg, generate(a)).model.protocol == Protocol::P1);
}
