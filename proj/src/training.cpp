#include "emgkin/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include "emgkin/error.hpp"

namespace emgkin {
namespace {

constexpr std::size_t kInferenceChunk = 256;

template <typename T>
BasicTensor<T> gather_rows(const BasicTensor<T>& src, std::span<const std::size_t> idx) {
  Shape shape = src.shape();
  shape[0] = idx.size();
  BasicTensor<T> out(shape);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto from = src.row(idx[r]);
    std::copy(from.begin(), from.end(), out.row(r).begin());
  }
  return out;
}

template <typename T>
BasicTensor<T> row_range(const BasicTensor<T>& src, std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return gather_rows(src, idx);
}

// Batch boundaries over a permutation. The last partial batch is kept, but a
// lone trailing sample joins the previous batch: batch statistics need two.
std::vector<std::size_t> batch_bounds(std::size_t n, std::size_t batch) {
  std::vector<std::size_t> bounds{0};
  while (bounds.back() < n) bounds.push_back(std::min(n, bounds.back() + batch));
  if (bounds.size() > 2 && n - bounds[bounds.size() - 2] == 1) {
    bounds.erase(bounds.end() - 2);
  }
  return bounds;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Tensor standardized_targets(const TargetScaler& scaler, const Tensor64& labels) {
  return scaler.forward(labels).cast<float>();
}

}  // namespace

TrainingConfig TrainingConfig::paper() { return TrainingConfig{}; }

TrainingConfig TrainingConfig::desk() {
  TrainingConfig c;
  c.cnn.epochs = 5;
  c.lstm.epochs = 10;
  c.duration_s = 60.0;
  return c;
}

void TrainingConfig::validate() const {
  if (!(window_ms > 0.0) || !(hop_ms > 0.0)) throw ConfigError("window_ms and hop_ms must be positive");
  if (k == 0) throw ConfigError("k must be at least 1");
  if (lstm_hidden == 0) throw ConfigError("lstm hidden size must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must be in [0, 1)");
  if (split != "intra" && split != "inter") throw ConfigError("split must be intra or inter, got " + split);
  if (!(duration_s > 0.0)) throw ConfigError("duration_s must be positive");
  if (n_fft < 2) throw ConfigError("n_fft must be at least 2");
  cnn.validate();
  lstm.validate();
}

TargetScaler TargetScaler::fit(const Tensor64& labels) {
  if (labels.rank() != 2 || labels.dim(0) < 2) {
    throw InsufficientDataError("target scaling needs at least two labelled windows");
  }
  const std::size_t m = labels.dim(0), d = labels.dim(1);
  TargetScaler s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += labels(i, j);
  }
  for (auto& v : s.mean) v /= static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) s.scale[j] += std::pow(labels(i, j) - s.mean[j], 2);
  }
  for (std::size_t j = 0; j < d; ++j) {
    s.scale[j] = std::sqrt(s.scale[j] / static_cast<double>(m));
    if (s.scale[j] == 0.0) {
      throw UndefinedMetricError("training targets for DoF " + std::to_string(j) +
                                 " have zero variance");
    }
  }
  return s;
}

Tensor64 TargetScaler::forward(const Tensor64& labels) const {
  if (labels.rank() != 2 || labels.dim(1) != mean.size()) {
    throw DimensionError("target scaler: labels " + shape_string(labels.shape()));
  }
  Tensor64 out(labels.shape());
  for (std::size_t i = 0; i < labels.dim(0); ++i) {
    for (std::size_t j = 0; j < mean.size(); ++j) out(i, j) = (labels(i, j) - mean[j]) / scale[j];
  }
  return out;
}

Tensor64 TargetScaler::inverse(const Tensor64& standardized) const {
  if (standardized.rank() != 2 || standardized.dim(1) != mean.size()) {
    throw DimensionError("target scaler: values " + shape_string(standardized.shape()));
  }
  Tensor64 out(standardized.shape());
  for (std::size_t i = 0; i < standardized.dim(0); ++i) {
    for (std::size_t j = 0; j < mean.size(); ++j) {
      out(i, j) = standardized(i, j) * scale[j] + mean[j];
    }
  }
  return out;
}

std::vector<RawWindow> Preprocessor::windows(const SemgRecording& raw) const {
  const SemgRecording scaled = apply_normalizer(norm, apply_filter_chain(raw, filters));
  return segment_windows(scaled, window, hop);
}

std::vector<InputMatrix> Preprocessor::matrices(const SemgRecording& raw) const {
  const auto w = windows(raw);
  std::vector<InputMatrix> out;
  out.reserve(w.size());
  for (const auto& win : w) out.push_back(build_matrix(win, mode, n_fft));
  return out;
}

std::size_t Preprocessor::matrix_length() const {
  return emgkin::matrix_length(mode, window, n_fft);
}

Preprocessor fit_preprocessor(const TrainingConfig& config, const SemgRecording& train_raw) {
  Preprocessor p;
  p.filters = config.filters;
  p.norm = fit_normalizer(apply_filter_chain(train_raw, config.filters));
  p.window = ms_to_samples(config.window_ms, train_raw.fs_emg);
  p.hop = ms_to_samples(config.hop_ms, train_raw.fs_emg);
  if (p.window == 0 || p.hop == 0) throw ConfigError("window or hop rounds to zero samples");
  p.mode = config.matrix_mode;
  p.n_fft = config.n_fft;
  if (p.mode == MatrixMode::spectral && p.n_fft < p.window) {
    throw ConfigError("n_fft " + std::to_string(p.n_fft) + " is shorter than the window (" +
                      std::to_string(p.window) + " samples)");
  }
  return p;
}

MatrixDataset stack_matrices(const std::vector<InputMatrix>& matrices) {
  if (matrices.empty()) throw InsufficientDataError("no input matrices to stack");
  const std::size_t l = matrices[0].length(), n = matrices[0].channels();
  const std::size_t d = matrices[0].label.size();
  MatrixDataset ds;
  ds.inputs = Tensor({matrices.size(), l, n});
  ds.labels = Tensor64({matrices.size(), d});
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const auto& m = matrices[i];
    if (m.length() != l || m.channels() != n || m.label.size() != d) {
      throw DimensionError("input matrices differ in shape");
    }
    auto dst = ds.inputs.row(i);
    for (std::size_t e = 0; e < dst.size(); ++e) dst[e] = static_cast<float>(m.values[e]);
    for (std::size_t j = 0; j < d; ++j) ds.labels(i, j) = m.label[j];
    ds.end_times.push_back(m.end_time);
  }
  return ds;
}

CnnArchitecture architecture_for(const TrainingConfig& config, std::size_t input_length,
                                 std::size_t channels, std::size_t outputs) {
  CnnArchitecture a;
  a.input_length = input_length;
  a.input_channels = channels;
  a.outputs = outputs;
  a.leaky_slope = config.leaky_slope;
  a.dropout = config.dropout;
  a.validate();
  return a;
}

CnnTraining train_cnn(const MatrixDataset& data, const TargetScaler& scaler,
                      const TrainingConfig& config, std::uint64_t seed) {
  if (data.size() < 2) throw InsufficientDataError("cnn training needs at least two windows");
  config.cnn.validate();
  CnnTraining out{CnnModel<float>(architecture_for(config, data.inputs.dim(1), data.inputs.dim(2),
                                                   data.labels.dim(1)),
                                  seed),
                  {}};
  auto& model = out.model;
  model.reseed_dropout(stream_seed(seed, 11));
  model.set_mode(Mode::train);
  const Tensor targets = standardized_targets(scaler, data.labels);

  Rng shuffle_rng(stream_seed(seed, 12));
  Sgdm<float> sgdm(config.cnn.momentum);
  Adam<float> adam(config.cnn.beta1, config.cnn.beta2, config.cnn.epsilon);
  auto params = model.parameters();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bounds = batch_bounds(data.size(), config.cnn.batch_size);

  for (std::size_t epoch = 0; epoch < config.cnn.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = lr_at(config.cnn, epoch);
    double sum = 0.0;
    for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
      const std::span<const std::size_t> idx(order.data() + bounds[b], bounds[b + 1] - bounds[b]);
      const Tensor x = gather_rows(data.inputs, idx);
      const Tensor y = gather_rows(targets, idx);
      const auto loss = mse_loss(model.forward(x), y);
      if (!std::isfinite(loss.loss)) throw DivergenceError("cnn", epoch, b);
      model.backward(loss.grad);
      if (config.cnn.kind == OptimizerKind::sgdm) {
        sgdm.step(params, lr);
      } else {
        adam.step(params, lr);
      }
      sum += loss.loss;
    }
    out.loss_history.push_back(sum / static_cast<double>(bounds.size() - 1));
  }
  model.set_mode(Mode::eval);
  return out;
}

Tensor extract_dataset_features(CnnModel<float>& cnn, const Tensor& inputs) {
  const std::size_t m = inputs.dim(0), f = cnn.architecture().feature_dim();
  Tensor out({m, f});
  for (std::size_t begin = 0; begin < m; begin += kInferenceChunk) {
    const std::size_t end = std::min(m, begin + kInferenceChunk);
    const Tensor feats = cnn.extract(row_range(inputs, begin, end));
    std::copy(feats.data().begin(), feats.data().end(), out.row(begin).begin());
  }
  return out;
}

namespace {

Tensor stack_sequences(const std::vector<FeatureSequence>& seqs) {
  const std::size_t k = seqs[0].features.dim(0), f = seqs[0].features.dim(1);
  Tensor out({seqs.size(), k, f});
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    std::copy(seqs[s].features.data().begin(), seqs[s].features.data().end(), out.row(s).begin());
  }
  return out;
}

}  // namespace

LstmTraining train_lstm(const Tensor& features, const Tensor64& std_labels,
                        const TrainingConfig& config, std::uint64_t seed) {
  config.lstm.validate();
  const auto seqs = build_sequences(features, std_labels, config.k);
  if (seqs.size() < 2) throw InsufficientDataError("lstm training needs at least two sequences");
  const Tensor inputs = stack_sequences(seqs);
  const std::size_t d = std_labels.dim(1);
  Tensor targets({seqs.size(), d});
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    for (std::size_t j = 0; j < d; ++j) targets(s, j) = static_cast<float>(seqs[s].target[j]);
  }

  LstmTraining out{LstmParams<float>::initialized(features.dim(1), config.lstm_hidden, d, seed), {}};
  LstmRegressor<float> net(config.dropout);
  Rng dropout_rng(stream_seed(seed, 21));
  Rng shuffle_rng(stream_seed(seed, 22));
  Sgdm<float> sgdm(config.lstm.momentum);
  Adam<float> adam(config.lstm.beta1, config.lstm.beta2, config.lstm.epsilon);
  auto params = out.params.parameters();
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bounds = batch_bounds(seqs.size(), config.lstm.batch_size);

  for (std::size_t epoch = 0; epoch < config.lstm.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = lr_at(config.lstm, epoch);
    double sum = 0.0;
    for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
      const std::span<const std::size_t> idx(order.data() + bounds[b], bounds[b + 1] - bounds[b]);
      const Tensor x = gather_rows(inputs, idx);
      const Tensor y = gather_rows(targets, idx);
      const auto loss = mse_loss(net.forward(out.params, x, Mode::train, dropout_rng), y);
      if (!std::isfinite(loss.loss)) throw DivergenceError("lstm", epoch, b);
      net.backward(out.params, loss.grad);
      if (config.lstm.kind == OptimizerKind::adam) {
        adam.step(params, lr);
      } else {
        sgdm.step(params, lr);
      }
      sum += loss.loss;
    }
    out.loss_history.push_back(sum / static_cast<double>(bounds.size() - 1));
  }
  return out;
}

HybridTraining train_hybrid(const TrainingConfig& config, const SemgRecording& train_raw) {
  config.validate();
  Preprocessor prep = fit_preprocessor(config, train_raw);
  const MatrixDataset data = stack_matrices(prep.matrices(train_raw));
  if (data.size() < config.k + 1) {
    throw InsufficientDataError("training partition yields " + std::to_string(data.size()) +
                                " windows, fewer than k + 1 = " + std::to_string(config.k + 1));
  }
  const TargetScaler scaler = TargetScaler::fit(data.labels);
  CnnTraining stage1 = train_cnn(data, scaler, config, config.seed);
  const Tensor features = extract_dataset_features(stage1.model, data.inputs);
  LstmTraining stage2 = train_lstm(features, scaler.forward(data.labels), config,
                                   stream_seed(config.seed, 1));
  return HybridTraining{HybridModel{std::move(stage1.model), std::move(stage2.params), prep, scaler,
                                    config.k, train_raw.protocol, config.dropout},
                        std::move(stage1.loss_history), std::move(stage2.loss_history)};
}

HybridTraining retrain_lstm(const HybridModel& base, const TrainingConfig& config,
                            const SemgRecording& train_raw) {
  config.validate();
  HybridModel model = base;
  const MatrixDataset data = stack_matrices(model.prep.matrices(train_raw));
  if (data.size() < config.k + 1) {
    throw InsufficientDataError("training partition yields " + std::to_string(data.size()) +
                                " windows, fewer than k + 1 = " + std::to_string(config.k + 1));
  }
  const Tensor features = extract_dataset_features(model.cnn, data.inputs);
  LstmTraining stage2 = train_lstm(features, model.scaler.forward(data.labels), config,
                                   stream_seed(config.seed, 1));
  model.lstm = std::move(stage2.params);
  model.k = config.k;
  model.dropout = config.dropout;
  return HybridTraining{std::move(model), {}, std::move(stage2.loss_history)};
}

namespace {

struct Inference {
  MatrixDataset data;
  Tensor features;  // [M x F]
  Tensor64 head;    // [M x D], degrees
};

Inference run_cnn(HybridModel& model, const SemgRecording& raw) {
  Inference inf{stack_matrices(model.prep.matrices(raw)), {}, {}};
  const std::size_t m = inf.data.size();
  if (m < model.k) {
    throw InsufficientDataError("recording yields " + std::to_string(m) + " windows, fewer than k = " +
                                std::to_string(model.k));
  }
  const Mode saved = model.cnn.mode();
  model.cnn.set_mode(Mode::eval);
  inf.features = Tensor({m, model.cnn.architecture().feature_dim()});
  Tensor64 head({m, model.dof_count()});
  for (std::size_t begin = 0; begin < m; begin += kInferenceChunk) {
    const std::size_t end = std::min(m, begin + kInferenceChunk);
    const Tensor y = model.cnn.forward(row_range(inf.data.inputs, begin, end));
    const auto& f = model.cnn.features();
    std::copy(f.data().begin(), f.data().end(), inf.features.row(begin).begin());
    for (std::size_t e = 0; e < y.size(); ++e) head.row(begin)[e] = y[e];
  }
  model.cnn.set_mode(saved);
  inf.head = model.scaler.inverse(head);
  return inf;
}

Trajectory aligned(const Inference& inf, std::size_t k, const Tensor64& pred_all_or_tail,
                   bool tail_only) {
  const std::size_t m = inf.data.size(), p = m - k + 1, d = inf.data.labels.dim(1);
  Trajectory t;
  t.truth = Tensor64({p, d});
  t.pred = Tensor64({p, d});
  for (std::size_t r = 0; r < p; ++r) {
    const std::size_t w = r + k - 1;
    t.time.push_back(inf.data.end_times[w]);
    for (std::size_t j = 0; j < d; ++j) {
      t.truth(r, j) = inf.data.labels(w, j);
      t.pred(r, j) = tail_only ? pred_all_or_tail(r, j) : pred_all_or_tail(w, j);
    }
  }
  return t;
}

}  // namespace

Trajectory predict(HybridModel& model, const SemgRecording& raw) {
  const Inference inf = run_cnn(model, raw);
  const auto seqs = build_sequences(inf.features, inf.data.labels, model.k);
  const Tensor inputs = stack_sequences(seqs);
  LstmRegressor<float> net(model.dropout);
  Rng unused(0);
  Tensor64 out({seqs.size(), model.dof_count()});
  for (std::size_t begin = 0; begin < seqs.size(); begin += kInferenceChunk) {
    const std::size_t end = std::min(seqs.size(), begin + kInferenceChunk);
    const Tensor y = net.forward(model.lstm, row_range(inputs, begin, end), Mode::eval, unused);
    for (std::size_t e = 0; e < y.size(); ++e) out.row(begin)[e] = y[e];
  }
  return aligned(inf, model.k, model.scaler.inverse(out), true);
}

Trajectory predict_cnn(HybridModel& model, const SemgRecording& raw) {
  const Inference inf = run_cnn(model, raw);
  return aligned(inf, model.k, inf.head, false);
}

std::uint64_t parameter_checksum(CnnModel<float>& cnn) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : cnn.state()) {
    for (float v : t.tensor->data()) {
      h ^= std::bit_cast<std::uint32_t>(v);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace emgkin
