#pragma once

// Single-stream CNN: four convolutional blocks
//   conv(k=3, pad=1) -> batchnorm -> leaky ReLU -> maxpool(3, stride 1) -> dropout
// then two fully connected blocks
//   fc -> batchnorm -> leaky ReLU -> dropout
// and a linear regression head. The output of the last FC block is the deep
// feature consumed by the LSTM stage.

#include <cstdint>
#include <vector>

#include "emgkin/layers.hpp"

namespace emgkin {

struct CnnArchitecture {
  std::size_t input_length = 101;
  std::size_t input_channels = 6;
  std::vector<std::size_t> conv_channels{16, 16, 32, 32};
  std::vector<std::size_t> fc_units{100, 20};
  std::size_t outputs = 1;
  std::size_t kernel = 3;
  std::size_t pool = 3;
  double leaky_slope = 0.1;
  double dropout = 0.3;

  /// Length entering the first block followed by the length after each block.
  std::vector<std::size_t> block_lengths() const {
    std::vector<std::size_t> out{input_length};
    for (std::size_t i = 0; i < conv_channels.size(); ++i) {
      const std::size_t l = out.back();
      out.push_back(l < pool ? 0 : l - pool + 1);
    }
    return out;
  }
  std::size_t flatten_size() const { return block_lengths().back() * conv_channels.back(); }
  std::size_t feature_dim() const { return fc_units.back(); }

  void validate() const {
    if (conv_channels.empty() || fc_units.empty()) throw ConfigError("CNN needs conv and fc blocks");
    if (block_lengths().back() == 0) {
      throw ConfigError("input length " + std::to_string(input_length) +
                        " too short for the pooling chain");
    }
    if (outputs == 0) throw ConfigError("CNN needs at least one output");
  }

  friend bool operator==(const CnnArchitecture&, const CnnArchitecture&) = default;
};

template <typename T>
class CnnModel {
 public:
  struct ConvBlock {
    Conv1d<T> conv;
    BatchNorm<T> bn;
    LeakyRelu<T> act;
    MaxPool1d<T> pool;
    Dropout<T> drop;
  };
  struct FcBlock {
    Dense<T> fc;
    BatchNorm<T> bn;
    LeakyRelu<T> act;
    Dropout<T> drop;
  };

  CnnModel(const CnnArchitecture& arch, std::uint64_t seed)
      : arch_(arch), head_(arch.fc_units.back(), arch.outputs, "head"), rng_(seed) {
    arch_.validate();
    std::size_t in = arch.input_channels;
    for (std::size_t i = 0; i < arch.conv_channels.size(); ++i) {
      const std::string p = "conv" + std::to_string(i + 1);
      const std::size_t out = arch.conv_channels[i];
      conv_.push_back(ConvBlock{Conv1d<T>(in, out, arch.kernel, p + ".conv"),
                                BatchNorm<T>(out, p + ".bn"), LeakyRelu<T>(arch.leaky_slope),
                                MaxPool1d<T>(arch.pool, 1), Dropout<T>(arch.dropout)});
      in = out;
    }
    std::size_t units = arch.flatten_size();
    for (std::size_t i = 0; i < arch.fc_units.size(); ++i) {
      const std::string p = "fc" + std::to_string(i + 1);
      fc_.push_back(FcBlock{Dense<T>(units, arch.fc_units[i], p + ".fc"),
                            BatchNorm<T>(arch.fc_units[i], p + ".bn"),
                            LeakyRelu<T>(arch.leaky_slope), Dropout<T>(arch.dropout)});
      units = arch.fc_units[i];
    }
    // Fan-in normal init with the leaky-ReLU gain 2 / (1 + slope^2).
    Rng init_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const double gain_sq = 2.0 / (1.0 + arch.leaky_slope * arch.leaky_slope);
    for (auto& b : conv_) b.conv.init(gain_sq, init_rng);
    for (auto& b : fc_) b.fc.init(gain_sq, init_rng);
    head_.init(1.0, init_rng);
  }

  const CnnArchitecture& architecture() const { return arch_; }

  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }
  void reseed_dropout(std::uint64_t seed) { rng_.seed(seed); }

  /// x: [B x L x N] -> predictions [B x outputs]. The deep features of the
  /// same pass are available from features().
  BasicTensor<T> forward(const BasicTensor<T>& x) {
    if (x.rank() != 3 || x.dim(1) != arch_.input_length || x.dim(2) != arch_.input_channels) {
      throw DimensionError("cnn expects [B x " + std::to_string(arch_.input_length) + " x " +
                           std::to_string(arch_.input_channels) + "], got " +
                           shape_string(x.shape()));
    }
    BasicTensor<T> h = x;
    for (auto& b : conv_) {
      h = b.conv.forward(h);
      h = b.bn.forward(h, mode_);
      h = b.act.forward(h);
      h = b.pool.forward(h);
      h = b.drop.forward(h, mode_, rng_);
    }
    conv_out_shape_ = h.shape();
    h = h.reshape({h.dim(0), h.dim(1) * h.dim(2)});
    for (auto& b : fc_) {
      h = b.fc.forward(h);
      h = b.bn.forward(h, mode_);
      h = b.act.forward(h);
      h = b.drop.forward(h, mode_, rng_);
    }
    features_ = h;
    return head_.forward(h);
  }

  /// Deep features of the most recent forward pass, [B x feature_dim].
  const BasicTensor<T>& features() const { return features_; }

  /// Deep features in eval mode, leaving the model's mode unchanged.
  BasicTensor<T> extract(const BasicTensor<T>& x) {
    const Mode saved = mode_;
    mode_ = Mode::eval;
    forward(x);
    mode_ = saved;
    return features_;
  }

  /// Backpropagates d(loss)/d(predictions); fills every parameter gradient
  /// and returns d(loss)/d(input).
  BasicTensor<T> backward(const BasicTensor<T>& dpred) {
    BasicTensor<T> g = head_.backward(dpred);
    for (auto it = fc_.rbegin(); it != fc_.rend(); ++it) {
      g = it->drop.backward(g);
      g = it->act.backward(g);
      g = it->bn.backward(g);
      g = it->fc.backward(g);
    }
    g = g.reshape(conv_out_shape_);
    for (auto it = conv_.rbegin(); it != conv_.rend(); ++it) {
      g = it->drop.backward(g);
      g = it->pool.backward(g);
      g = it->act.backward(g);
      g = it->bn.backward(g);
      g = it->conv.backward(g);
    }
    return g;
  }

  /// Trainable parameters in a fixed declared order.
  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    for (auto& b : conv_) {
      for (auto* p : b.conv.parameters()) out.push_back(p);
      for (auto* p : b.bn.parameters()) out.push_back(p);
    }
    for (auto& b : fc_) {
      for (auto* p : b.fc.parameters()) out.push_back(p);
      for (auto* p : b.bn.parameters()) out.push_back(p);
    }
    for (auto* p : head_.parameters()) out.push_back(p);
    return out;
  }

  /// Everything a checkpoint must hold: parameters plus running statistics.
  std::vector<NamedTensor<T>> state() {
    std::vector<NamedTensor<T>> out;
    const auto add_params = [&](auto& layer) {
      for (auto* p : layer.parameters()) out.push_back({p->name, &p->value});
    };
    for (auto& b : conv_) {
      add_params(b.conv);
      add_params(b.bn);
      for (auto& t : b.bn.buffers()) out.push_back(t);
    }
    for (auto& b : fc_) {
      add_params(b.fc);
      add_params(b.bn);
      for (auto& t : b.bn.buffers()) out.push_back(t);
    }
    add_params(head_);
    return out;
  }

  std::vector<ConvBlock>& conv_blocks() { return conv_; }
  std::vector<FcBlock>& fc_blocks() { return fc_; }
  Dense<T>& head() { return head_; }

 private:
  CnnArchitecture arch_;
  std::vector<ConvBlock> conv_;
  std::vector<FcBlock> fc_;
  Dense<T> head_;
  Rng rng_;
  Mode mode_ = Mode::train;
  Shape conv_out_shape_;
  BasicTensor<T> features_;
};

}  // namespace emgkin
