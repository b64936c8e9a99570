#pragma once

// Two-stage training. Stage 1 fits the CNN on windowed input matrices with
// the angle at each window end as target. Stage 2 freezes the CNN, extracts
// deep features for every window and fits the LSTM on overlapping feature
// sequences.

#include <cstdint>
#include <string>
#include <vector>

#include "emgkin/cnn.hpp"
#include "emgkin/dsp.hpp"
#include "emgkin/lstm.hpp"
#include "emgkin/optim.hpp"

namespace emgkin {

struct TrainingConfig {
  Protocol protocol = Protocol::P1;
  MatrixMode matrix_mode = MatrixMode::spectral;
  double window_ms = 100.0;
  double hop_ms = 50.0;
  std::size_t n_fft = 200;
  std::size_t k = 18;
  std::size_t lstm_hidden = 50;
  double dropout = 0.3;
  double leaky_slope = 0.1;
  std::uint64_t seed = 1;
  std::string split = "intra";   // intra | inter
  double duration_s = 180.0;     // synthetic session length
  OptimizerConfig cnn{OptimizerKind::sgdm, 1e-4, 0.1, 10, 0.9, 0.9, 0.999, 1e-8, 128, 50};
  OptimizerConfig lstm{OptimizerKind::adam, 1e-3, 0.1, 10, 0.9, 0.9, 0.999, 1e-8, 64, 100};
  FilterChainConfig filters;

  /// Full-scale schedule: 50 CNN epochs, 100 LSTM epochs, 180 s sessions.
  static TrainingConfig paper();
  /// Shortened schedule for desk runs: 5 / 10 epochs on 60 s sessions.
  static TrainingConfig desk();

  void validate() const;
  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

/// Per-DoF z-scoring of targets. Networks are fitted in standardized units;
/// outputs are mapped back to degrees.
struct TargetScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  static TargetScaler fit(const Tensor64& labels);  // [M x D]
  Tensor64 forward(const Tensor64& labels) const;
  Tensor64 inverse(const Tensor64& standardized) const;
  friend bool operator==(const TargetScaler&, const TargetScaler&) = default;
};

/// Filtering, scaling, windowing and matrix construction with statistics
/// fitted on one training partition.
struct Preprocessor {
  FilterChainConfig filters;
  NormalizationStats norm;
  std::size_t window = 0;
  std::size_t hop = 0;
  MatrixMode mode = MatrixMode::spectral;
  std::size_t n_fft = 200;

  /// Filtered and scaled windows of a raw recording.
  std::vector<RawWindow> windows(const SemgRecording& raw) const;
  std::vector<InputMatrix> matrices(const SemgRecording& raw) const;
  std::size_t matrix_length() const;

  friend bool operator==(const Preprocessor&, const Preprocessor&) = default;
};

/// Filters the training partition and fits the min-max statistics on it.
Preprocessor fit_preprocessor(const TrainingConfig& config, const SemgRecording& train_raw);

/// Stacked matrices: inputs [M x L x N], labels [M x D] in degrees.
struct MatrixDataset {
  Tensor inputs;
  Tensor64 labels;
  std::vector<double> end_times;

  std::size_t size() const { return end_times.size(); }
};

MatrixDataset stack_matrices(const std::vector<InputMatrix>& matrices);

CnnArchitecture architecture_for(const TrainingConfig& config, std::size_t input_length,
                                 std::size_t channels, std::size_t outputs);

struct CnnTraining {
  CnnModel<float> model;
  std::vector<double> loss_history;  // epoch-mean loss
};

/// Stage 1. Labels are standardized with `scaler`. The returned model is in
/// eval mode.
CnnTraining train_cnn(const MatrixDataset& data, const TargetScaler& scaler,
                      const TrainingConfig& config, std::uint64_t seed);

/// Eval-mode deep features in dataset order, [M x feature_dim].
Tensor extract_dataset_features(CnnModel<float>& cnn, const Tensor& inputs);

struct LstmTraining {
  LstmParams<float> params;
  std::vector<double> loss_history;
};

/// Stage 2 on sequences built from `features` [M x F] and standardized labels.
LstmTraining train_lstm(const Tensor& features, const Tensor64& std_labels,
                        const TrainingConfig& config, std::uint64_t seed);

struct HybridModel {
  CnnModel<float> cnn;
  LstmParams<float> lstm;
  Preprocessor prep;
  TargetScaler scaler;
  std::size_t k = 18;
  Protocol protocol = Protocol::P1;
  double dropout = 0.3;

  std::size_t dof_count() const { return scaler.mean.size(); }
};

struct HybridTraining {
  HybridModel model;
  std::vector<double> cnn_loss;
  std::vector<double> lstm_loss;
};

HybridTraining train_hybrid(const TrainingConfig& config, const SemgRecording& train_raw);

/// Stage 2 only: a fresh LSTM with a different k on the frozen CNN of `base`.
HybridTraining retrain_lstm(const HybridModel& base, const TrainingConfig& config,
                            const SemgRecording& train_raw);

/// Predictions aligned to sequence end windows, one row per window from
/// index k - 1 onward.
struct Trajectory {
  std::vector<double> time;
  Tensor64 truth;  // [P x D]
  Tensor64 pred;   // [P x D]
};

/// Throws InsufficientDataError when the recording yields fewer than k windows.
Trajectory predict(HybridModel& model, const SemgRecording& raw);
/// Regression head of the CNN on the same end windows as predict().
Trajectory predict_cnn(HybridModel& model, const SemgRecording& raw);

/// FNV-1a hash over the bits of every CNN state tensor.
std::uint64_t parameter_checksum(CnnModel<float>& cnn);

}  // namespace emgkin
