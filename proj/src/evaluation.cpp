#include "emgkin/evaluation.hpp"

#include <chrono>
#include <cmath>

#include "emgkin/error.hpp"

namespace emgkin {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

EvaluationReport make_report(std::string model, Protocol protocol, const std::string& split,
                             std::size_t k, MatrixMode mode, std::size_t input_length,
                             Trajectory trajectory) {
  EvaluationReport r;
  r.model = std::move(model);
  r.protocol = protocol;
  r.split = split;
  r.dof = score_trajectory(trajectory, protocol);
  r.k = k;
  r.matrix_mode = mode;
  r.input_length = input_length;
  r.sequences = trajectory.time.size();
  r.trajectory = std::move(trajectory);
  return r;
}

}  // namespace

std::string to_string(SplitMode mode) { return mode == SplitMode::intra ? "intra" : "inter"; }

SplitMode parse_split_mode(std::string_view text) {
  if (text == "intra") return SplitMode::intra;
  if (text == "inter") return SplitMode::inter;
  throw ConfigError("unknown split '" + std::string(text) + "' (expected intra or inter)");
}

std::vector<std::size_t> fold_boundaries(std::size_t samples, std::size_t folds) {
  if (folds < 2) throw ConfigError("at least two folds are required");
  std::vector<std::size_t> b;
  for (std::size_t i = 0; i <= folds; ++i) b.push_back(i * samples / folds);
  return b;
}

std::pair<SemgRecording, SemgRecording> split_session(const SemgRecording& rec,
                                                      const SplitPlan& plan) {
  if (plan.mode != SplitMode::intra) {
    throw UsageError("split_session applies to intra-session plans; inter uses two sessions");
  }
  const auto b = fold_boundaries(rec.emg_samples(), plan.folds);
  const std::size_t cut = b[plan.folds - 1];
  if (cut == 0 || cut == rec.emg_samples()) {
    throw InsufficientDataError("session too short to split into " + std::to_string(plan.folds) +
                                " folds");
  }
  return {rec.slice_samples(0, cut), rec.slice_samples(cut, rec.emg_samples())};
}

double EvaluationReport::mean_r2() const {
  if (dof.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : dof) s += d.r2;
  return s / static_cast<double>(dof.size());
}

const DofScore& EvaluationReport::score(std::string_view dof_name) const {
  for (const auto& d : dof) {
    if (d.name == dof_name) return d;
  }
  throw UsageError("report has no DoF named " + std::string(dof_name));
}

bool operator==(const EvaluationReport& a, const EvaluationReport& b) {
  return a.model == b.model && a.protocol == b.protocol && a.split == b.split && a.dof == b.dof &&
         a.k == b.k && a.matrix_mode == b.matrix_mode && a.runtime_s == b.runtime_s &&
         a.input_length == b.input_length && a.sequences == b.sequences &&
         a.trajectory.time == b.trajectory.time && a.trajectory.truth == b.trajectory.truth &&
         a.trajectory.pred == b.trajectory.pred;
}

std::vector<DofScore> score_trajectory(const Trajectory& t, Protocol protocol) {
  const auto dofs = active_dofs(protocol);
  if (t.truth.dim(1) != dofs.size() || t.pred.shape() != t.truth.shape()) {
    throw DimensionError("trajectory " + shape_string(t.truth.shape()) + " does not match protocol " +
                         to_string(protocol));
  }
  std::vector<DofScore> out;
  const std::size_t p = t.truth.dim(0);
  for (std::size_t j = 0; j < dofs.size(); ++j) {
    std::vector<double> truth(p), est(p);
    for (std::size_t i = 0; i < p; ++i) {
      truth[i] = t.truth(i, j);
      est[i] = t.pred(i, j);
    }
    out.push_back({dof_name(dofs[j]), r_squared(truth, est)});
  }
  return out;
}

std::string split_label(const SplitPlan& plan) {
  if (plan.mode == SplitMode::intra) return "intra";
  return "inter:" + plan.train_session + "->" + plan.test_session;
}

EvaluationReport evaluate_hybrid(HybridModel& model, const SemgRecording& test_raw,
                                 const std::string& split, MatrixMode mode) {
  const auto start = Clock::now();
  auto r = make_report("cnn-lstm", model.protocol, split, model.k, mode,
                       model.cnn.architecture().input_length, predict(model, test_raw));
  r.runtime_s = seconds_since(start);
  return r;
}

EvaluationReport evaluate_cnn(HybridModel& model, const SemgRecording& test_raw,
                              const std::string& split, MatrixMode mode) {
  const auto start = Clock::now();
  auto r = make_report("cnn", model.protocol, split, model.k, mode,
                       model.cnn.architecture().input_length, predict_cnn(model, test_raw));
  r.runtime_s = seconds_since(start);
  return r;
}

Tensor64 handcrafted_rows(const Preprocessor& prep, const SemgRecording& raw) {
  const auto windows = prep.windows(raw);
  if (windows.empty()) throw InsufficientDataError("recording yields no windows");
  Tensor64 rows;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto v = extract_features(windows[i].samples).flatten();
    if (i == 0) rows = Tensor64({windows.size(), v.size()});
    std::copy(v.begin(), v.end(), rows.row(i).begin());
  }
  return rows;
}

namespace {

Tensor64 window_labels(const std::vector<RawWindow>& windows) {
  Tensor64 y({windows.size(), windows[0].label.size()});
  for (std::size_t i = 0; i < windows.size(); ++i) {
    for (std::size_t j = 0; j < y.dim(1); ++j) y(i, j) = windows[i].label[j];
  }
  return y;
}

}  // namespace

KrrBaseline fit_krr_baseline(const Preprocessor& prep, const SemgRecording& train_raw) {
  const Tensor64 rows = handcrafted_rows(prep, train_raw);
  const Tensor64 y = window_labels(prep.windows(train_raw));
  KrrBaseline b;
  b.pca = fit_pca(rows);
  const Tensor64 x = project_rows(b.pca, rows);
  b.tuning = tune_krr(x, y);
  b.model = fit_krr(x, y, b.tuning.gamma, b.tuning.lambda);
  return b;
}

EvaluationReport evaluate_krr(const KrrBaseline& baseline, const Preprocessor& prep,
                              const SemgRecording& test_raw, std::size_t k, Protocol protocol,
                              const std::string& split) {
  const auto start = Clock::now();
  const auto windows = prep.windows(test_raw);
  if (windows.size() < k) {
    throw InsufficientDataError("test recording yields " + std::to_string(windows.size()) +
                                " windows, fewer than k = " + std::to_string(k));
  }
  const Tensor64 x = project_rows(baseline.pca, handcrafted_rows(prep, test_raw));
  const Tensor64 pred_all = predict_rows(baseline.model, x);
  const Tensor64 y = window_labels(windows);
  const std::size_t p = windows.size() - k + 1, d = y.dim(1);
  Trajectory t;
  t.truth = Tensor64({p, d});
  t.pred = Tensor64({p, d});
  for (std::size_t r = 0; r < p; ++r) {
    const std::size_t w = r + k - 1;
    t.time.push_back(windows[w].end_time);
    for (std::size_t j = 0; j < d; ++j) {
      t.truth(r, j) = y(w, j);
      t.pred(r, j) = pred_all(w, j);
    }
  }
  auto r = make_report("krr", protocol, split, k, prep.mode, baseline.pca.output_dim(), std::move(t));
  r.runtime_s = seconds_since(start);
  return r;
}

EvaluationRun run_evaluation(const TrainingConfig& config, const SemgRecording& train_raw,
                             const SemgRecording& test_raw, const std::string& split,
                             bool baselines) {
  if (train_raw.protocol != test_raw.protocol) {
    throw ConfigError("training data is " + to_string(train_raw.protocol) + " but test data is " +
                      to_string(test_raw.protocol));
  }
  const auto start = Clock::now();
  EvaluationRun run{{}, train_hybrid(config, train_raw)};
  const double train_s = seconds_since(start);
  auto& model = run.training.model;
  run.reports.push_back(evaluate_hybrid(model, test_raw, split, config.matrix_mode));
  run.reports.back().runtime_s += train_s;
  if (baselines) {
    run.reports.push_back(evaluate_cnn(model, test_raw, split, config.matrix_mode));
    const auto krr_start = Clock::now();
    const KrrBaseline krr = fit_krr_baseline(model.prep, train_raw);
    const double krr_s = seconds_since(krr_start);
    run.reports.push_back(evaluate_krr(krr, model.prep, test_raw, model.k, model.protocol, split));
    run.reports.back().runtime_s += krr_s;
  }
  return run;
}

std::vector<EvaluationReport> sweep_timesteps(const TrainingConfig& config,
                                              const SemgRecording& train_raw,
                                              const SemgRecording& test_raw,
                                              const std::string& split,
                                              const std::vector<std::size_t>& ks) {
  if (ks.empty()) throw ConfigError("timestep sweep needs at least one k");
  TrainingConfig base = config;
  base.k = *std::min_element(ks.begin(), ks.end());
  const auto start = Clock::now();
  const HybridTraining shared = train_hybrid(base, train_raw);
  const double stage1_s = seconds_since(start);
  std::vector<EvaluationReport> out;
  for (std::size_t k : ks) {
    const auto t0 = Clock::now();
    TrainingConfig c = config;
    c.k = k;
    HybridTraining run = retrain_lstm(shared.model, c, train_raw);
    auto r = evaluate_hybrid(run.model, test_raw, split, c.matrix_mode);
    r.runtime_s += seconds_since(t0) + stage1_s;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EvaluationReport> compare_matrix_modes(const TrainingConfig& config,
                                                   const SemgRecording& train_raw,
                                                   const SemgRecording& test_raw,
                                                   const std::string& split) {
  std::vector<EvaluationReport> out;
  for (MatrixMode mode : {MatrixMode::spectral, MatrixMode::temporal}) {
    TrainingConfig c = config;
    c.matrix_mode = mode;
    out.push_back(run_evaluation(c, train_raw, test_raw, split, false).reports.front());
  }
  return out;
}

}  // namespace emgkin
