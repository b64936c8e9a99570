#pragma once

// Intra- and inter-session evaluation of the hybrid model and its baselines.

#include <string>
#include <vector>

#include "emgkin/features.hpp"
#include "emgkin/krr.hpp"
#include "emgkin/metrics.hpp"
#include "emgkin/training.hpp"

namespace emgkin {

enum class SplitMode { intra, inter };

std::string to_string(SplitMode mode);
SplitMode parse_split_mode(std::string_view text);

struct SplitPlan {
  SplitMode mode = SplitMode::intra;
  std::size_t folds = 4;      // intra: the last fold is the test fold
  std::string train_session;  // inter
  std::string test_session;   // inter
};

/// Fold boundaries floor(i * T / folds), i = 0..folds.
std::vector<std::size_t> fold_boundaries(std::size_t samples, std::size_t folds);

/// Splits raw samples (before any filtering): folds 1..n-1 train, fold n test.
std::pair<SemgRecording, SemgRecording> split_session(const SemgRecording& rec,
                                                      const SplitPlan& plan = {});

struct DofScore {
  std::string name;
  double r2 = 0.0;
  friend bool operator==(const DofScore&, const DofScore&) = default;
};

struct EvaluationReport {
  std::string model;  // cnn-lstm | cnn | krr
  Protocol protocol = Protocol::P1;
  std::string split;  // "intra" or "inter:A->B"
  std::vector<DofScore> dof;
  std::size_t k = 18;
  MatrixMode matrix_mode = MatrixMode::spectral;
  double runtime_s = 0.0;
  std::size_t input_length = 0;
  std::size_t sequences = 0;
  Trajectory trajectory;

  double mean_r2() const;
  const DofScore& score(std::string_view dof_name) const;
};

bool operator==(const EvaluationReport& a, const EvaluationReport& b);

/// Per-DoF R^2 of a trajectory.
std::vector<DofScore> score_trajectory(const Trajectory& t, Protocol protocol);

/// Describes the split of a report: "intra" or "inter:<train>-><test>".
std::string split_label(const SplitPlan& plan);

EvaluationReport evaluate_hybrid(HybridModel& model, const SemgRecording& test_raw,
                                 const std::string& split, MatrixMode mode);
EvaluationReport evaluate_cnn(HybridModel& model, const SemgRecording& test_raw,
                              const std::string& split, MatrixMode mode);

/// Hand-crafted features of every window (filtered and scaled by `prep`), [M x 7N].
Tensor64 handcrafted_rows(const Preprocessor& prep, const SemgRecording& raw);

struct KrrBaseline {
  PcaBasis pca;
  KrrModel model;
  KrrTuning tuning;
};

/// Tunes and fits KRR on PCA-projected hand-crafted features of the training partition.
KrrBaseline fit_krr_baseline(const Preprocessor& prep, const SemgRecording& train_raw);

/// Scores KRR on the same end windows as the hybrid model (index k - 1 onward).
EvaluationReport evaluate_krr(const KrrBaseline& baseline, const Preprocessor& prep,
                              const SemgRecording& test_raw, std::size_t k, Protocol protocol,
                              const std::string& split);

struct EvaluationRun {
  std::vector<EvaluationReport> reports;  // cnn-lstm, then cnn and krr when requested
  HybridTraining training;
};

/// Trains the hybrid on `train_raw` and scores every model on `test_raw`.
EvaluationRun run_evaluation(const TrainingConfig& config, const SemgRecording& train_raw,
                             const SemgRecording& test_raw, const std::string& split,
                             bool baselines = true);

/// One Stage-2 retraining per k on a shared Stage-1 CNN.
std::vector<EvaluationReport> sweep_timesteps(const TrainingConfig& config,
                                              const SemgRecording& train_raw,
                                              const SemgRecording& test_raw,
                                              const std::string& split,
                                              const std::vector<std::size_t>& ks = {8, 18, 58, 98});

/// Spectral and temporal runs of the otherwise identical pipeline.
std::vector<EvaluationReport> compare_matrix_modes(const TrainingConfig& config,
                                                   const SemgRecording& train_raw,
                                                   const SemgRecording& test_raw,
                                                   const std::string& split);

}  // namespace emgkin
