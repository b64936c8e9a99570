#pragma once

// Network layers with hand-written forward and backward passes.
//
// Activations are row-major [batch x length x channels] for the convolutional
// part and [batch x units] for the dense part. backward() must follow a
// forward() on the same layer; it overwrites parameter gradients rather than
// accumulating them.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "emgkin/error.hpp"
#include "emgkin/parallel.hpp"
#include "emgkin/tensor.hpp"

namespace emgkin {

enum class Mode { train, eval };

template <typename T>
struct Parameter {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Shape shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

/// Any tensor that is part of a model's persistent state.
template <typename T>
struct NamedTensor {
  std::string name;
  BasicTensor<T>* tensor;
};

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename T>
void fill_normal(BasicTensor<T>& t, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
}

template <typename T>
void fill_uniform(BasicTensor<T>& t, double limit, Rng& rng) {
  for (auto& v : t.data()) v = static_cast<T>((2.0 * uniform01(rng) - 1.0) * limit);
}

namespace detail {
inline void require_cache(bool cached, const char* layer) {
  if (!cached) throw UsageError(std::string(layer) + ": backward called without forward");
}
}  // namespace detail

// ---------------------------------------------------------------------------

/// 1-D convolution along the length axis, zero padding kernel/2, stride 1,
/// full channel mixing. weight: [out x in x kernel].
template <typename T>
class Conv1d {
 public:
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel = 3,
         const std::string& prefix = "conv")
      : in_(in_channels),
        out_(out_channels),
        kernel_(kernel),
        weight(prefix + ".weight", {out_channels, in_channels, kernel}),
        bias(prefix + ".bias", {out_channels}) {}

  void init(double gain_sq, Rng& rng) {
    fill_normal(weight.value, std::sqrt(gain_sq / static_cast<double>(in_ * kernel_)), rng);
    bias.value.fill(T{0});
  }

  BasicTensor<T> forward(const BasicTensor<T>& x) {
    if (x.rank() != 3 || x.dim(2) != in_) {
      throw DimensionError(weight.name + ": expected [B x L x " + std::to_string(in_) +
                           "], got " + shape_string(x.shape()));
    }
    input_ = x;
    cached_ = true;
    const std::size_t batch = x.dim(0), len = x.dim(1);
    const auto pad = static_cast<std::ptrdiff_t>(kernel_ / 2);
    // Repack to [k][o][i] so the inner product runs over contiguous memory.
    std::vector<T> wt(kernel_ * out_ * in_);
    for (std::size_t o = 0; o < out_; ++o)
      for (std::size_t i = 0; i < in_; ++i)
        for (std::size_t k = 0; k < kernel_; ++k)
          wt[(k * out_ + o) * in_ + i] = weight.value[(o * in_ + i) * kernel_ + k];

    BasicTensor<T> y({batch, len, out_});
    parallel_for(batch, [&](std::size_t b0, std::size_t b1) {
      for (std::size_t b = b0; b < b1; ++b) {
        for (std::size_t l = 0; l < len; ++l) {
          T* yrow = &y(b, l, 0);
          for (std::size_t o = 0; o < out_; ++o) yrow[o] = bias.value[o];
          for (std::size_t k = 0; k < kernel_; ++k) {
            const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(l + k) - pad;
            if (p < 0 || p >= static_cast<std::ptrdiff_t>(len)) continue;
            const T* xrow = &x(b, static_cast<std::size_t>(p), 0);
            for (std::size_t o = 0; o < out_; ++o) {
              const T* w = &wt[(k * out_ + o) * in_];
              T acc = 0;
              for (std::size_t i = 0; i < in_; ++i) acc += w[i] * xrow[i];
              yrow[o] += acc;
            }
          }
        }
      }
    });
    return y;
  }

  BasicTensor<T> backward(const BasicTensor<T>& dy) {
    detail::require_cache(cached_, "conv1d");
    const BasicTensor<T>& x = input_;
    const std::size_t batch = x.dim(0), len = x.dim(1);
    if (dy.shape() != Shape{batch, len, out_}) {
      throw DimensionError(weight.name + ": gradient shape " + shape_string(dy.shape()));
    }
    const auto pad = static_cast<std::ptrdiff_t>(kernel_ / 2);

    parallel_for(out_, [&](std::size_t o0, std::size_t o1) {
      std::vector<T> local(in_ * kernel_);
      for (std::size_t o = o0; o < o1; ++o) {
        std::fill(local.begin(), local.end(), T{0});
        T db = 0;
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t l = 0; l < len; ++l) {
            const T g = dy(b, l, o);
            db += g;
            for (std::size_t k = 0; k < kernel_; ++k) {
              const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(l + k) - pad;
              if (p < 0 || p >= static_cast<std::ptrdiff_t>(len)) continue;
              const T* xrow = &x(b, static_cast<std::size_t>(p), 0);
              T* acc = &local[k * in_];
              for (std::size_t i = 0; i < in_; ++i) acc[i] += g * xrow[i];
            }
          }
        }
        bias.grad[o] = db;
        for (std::size_t i = 0; i < in_; ++i)
          for (std::size_t k = 0; k < kernel_; ++k)
            weight.grad[(o * in_ + i) * kernel_ + k] = local[k * in_ + i];
      }
    });

    // [k][i][o] layout for the input gradient.
    std::vector<T> wt(kernel_ * in_ * out_);
    for (std::size_t o = 0; o < out_; ++o)
      for (std::size_t i = 0; i < in_; ++i)
        for (std::size_t k = 0; k < kernel_; ++k)
          wt[(k * in_ + i) * out_ + o] = weight.value[(o * in_ + i) * kernel_ + k];

    BasicTensor<T> dx(x.shape());
    parallel_for(batch, [&](std::size_t b0, std::size_t b1) {
      for (std::size_t b = b0; b < b1; ++b) {
        for (std::size_t l = 0; l < len; ++l) {
          const T* grow = &dy(b, l, 0);
          for (std::size_t k = 0; k < kernel_; ++k) {
            const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(l + k) - pad;
            if (p < 0 || p >= static_cast<std::ptrdiff_t>(len)) continue;
            T* dxrow = &dx(b, static_cast<std::size_t>(p), 0);
            for (std::size_t i = 0; i < in_; ++i) {
              const T* w = &wt[(k * in_ + i) * out_];
              T acc = 0;
              for (std::size_t o = 0; o < out_; ++o) acc += w[o] * grow[o];
              dxrow[i] += acc;
            }
          }
        }
      }
    });
    return dx;
  }

  std::vector<Parameter<T>*> parameters() { return {&weight, &bias}; }

  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }

 private:
  std::size_t in_, out_, kernel_;

 public:
  Parameter<T> weight;
  Parameter<T> bias;

 private:
  BasicTensor<T> input_;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------

/// Batch normalization over every axis except the last (channels).
/// Train mode uses population batch statistics and updates the running
/// estimates; eval mode uses the running estimates.
template <typename T>
class BatchNorm {
 public:
  explicit BatchNorm(std::size_t channels, const std::string& prefix = "bn",
                     double momentum = 0.1, double eps = 1e-5)
      : channels_(channels),
        momentum_(momentum),
        eps_(eps),
        gamma(prefix + ".gamma", {channels}),
        beta(prefix + ".beta", {channels}),
        running_mean({channels}, T{0}),
        running_var({channels}, T{1}),
        prefix_(prefix) {
    gamma.value.fill(T{1});
  }

  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) {
    if (x.rank() < 2 || x.shape().back() != channels_) {
      throw DimensionError(prefix_ + ": expected trailing dimension " +
                           std::to_string(channels_) + ", got " + shape_string(x.shape()));
    }
    const std::size_t rows = x.size() / channels_;
    if (mode == Mode::train && x.dim(0) < 2) {
      throw InsufficientDataError(prefix_ + ": batch normalization needs a batch of at least 2 in train mode");
    }
    mode_ = mode;
    xhat_ = BasicTensor<T>(x.shape());
    inv_std_.assign(channels_, T{0});
    std::vector<double> mean(channels_, 0.0), var(channels_, 0.0);
    if (mode == Mode::train) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < channels_; ++c) mean[c] += x[r * channels_ + c];
      for (auto& m : mean) m /= static_cast<double>(rows);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < channels_; ++c) {
          const double d = x[r * channels_ + c] - mean[c];
          var[c] += d * d;
        }
      for (auto& v : var) v /= static_cast<double>(rows);
      for (std::size_t c = 0; c < channels_; ++c) {
        running_mean[c] = static_cast<T>((1.0 - momentum_) * running_mean[c] + momentum_ * mean[c]);
        running_var[c] = static_cast<T>((1.0 - momentum_) * running_var[c] + momentum_ * var[c]);
      }
    } else {
      for (std::size_t c = 0; c < channels_; ++c) {
        mean[c] = running_mean[c];
        var[c] = running_var[c];
      }
    }
    for (std::size_t c = 0; c < channels_; ++c) {
      inv_std_[c] = static_cast<T>(1.0 / std::sqrt(var[c] + eps_));
    }
    BasicTensor<T> y(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < channels_; ++c) {
        const std::size_t idx = r * channels_ + c;
        const T h = static_cast<T>((x[idx] - mean[c])) * inv_std_[c];
        xhat_[idx] = h;
        y[idx] = gamma.value[c] * h + beta.value[c];
      }
    }
    cached_ = true;
    return y;
  }

  BasicTensor<T> backward(const BasicTensor<T>& dy) {
    detail::require_cache(cached_, "batchnorm");
    if (dy.shape() != xhat_.shape()) throw DimensionError(prefix_ + ": gradient shape mismatch");
    const std::size_t rows = dy.size() / channels_;
    std::vector<double> sum_dy(channels_, 0.0), sum_dy_xhat(channels_, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < channels_; ++c) {
        const std::size_t idx = r * channels_ + c;
        sum_dy[c] += dy[idx];
        sum_dy_xhat[c] += dy[idx] * xhat_[idx];
      }
    }
    for (std::size_t c = 0; c < channels_; ++c) {
      gamma.grad[c] = static_cast<T>(sum_dy_xhat[c]);
      beta.grad[c] = static_cast<T>(sum_dy[c]);
    }
    BasicTensor<T> dx(dy.shape());
    const double n = static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < channels_; ++c) {
        const std::size_t idx = r * channels_ + c;
        const double scale = static_cast<double>(gamma.value[c]) * inv_std_[c];
        if (mode_ == Mode::train) {
          dx[idx] = static_cast<T>(scale * (dy[idx] - sum_dy[c] / n - xhat_[idx] * sum_dy_xhat[c] / n));
        } else {
          dx[idx] = static_cast<T>(scale * dy[idx]);
        }
      }
    }
    return dx;
  }

  std::vector<Parameter<T>*> parameters() { return {&gamma, &beta}; }
  std::vector<NamedTensor<T>> buffers() {
    return {{prefix_ + ".running_mean", &running_mean}, {prefix_ + ".running_var", &running_var}};
  }

  std::size_t channels() const { return channels_; }

 private:
  std::size_t channels_;
  double momentum_;
  double eps_;

 public:
  Parameter<T> gamma;
  Parameter<T> beta;
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;

 private:
  std::string prefix_;
  Mode mode_ = Mode::eval;
  BasicTensor<T> xhat_;
  std::vector<T> inv_std_;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------

template <typename T>
class LeakyRelu {
 public:
  explicit LeakyRelu(double slope = 0.1) : slope_(static_cast<T>(slope)) {}

  BasicTensor<T> forward(const BasicTensor<T>& x) {
    input_ = x;
    cached_ = true;
    BasicTensor<T> y = x;
    for (auto& v : y.data()) v = v >= T{0} ? v : slope_ * v;
    return y;
  }

  BasicTensor<T> backward(const BasicTensor<T>& dy) {
    detail::require_cache(cached_, "leaky_relu");
    if (dy.shape() != input_.shape()) throw DimensionError("leaky_relu: gradient shape mismatch");
    BasicTensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (input_[i] < T{0}) dx[i] *= slope_;
    }
    return dx;
  }

 private:
  T slope_;
  BasicTensor<T> input_;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------

/// Max pooling along the length axis without padding. Ties go to the first
/// index.
template <typename T>
class MaxPool1d {
 public:
  explicit MaxPool1d(std::size_t size = 3, std::size_t stride = 1) : size_(size), stride_(stride) {}

  std::size_t output_length(std::size_t len) const {
    return len < size_ ? 0 : (len - size_) / stride_ + 1;
  }

  BasicTensor<T> forward(const BasicTensor<T>& x) {
    if (x.rank() != 3 || x.dim(1) < size_) {
      throw DimensionError("maxpool: input " + shape_string(x.shape()) + " shorter than pool size");
    }
    in_shape_ = x.shape();
    const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
    const std::size_t out_len = output_length(len);
    BasicTensor<T> y({batch, out_len, ch});
    argmax_.assign(y.size(), 0);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t l = 0; l < out_len; ++l) {
        for (std::size_t c = 0; c < ch; ++c) {
          std::size_t best = l * stride_;
          T value = x(b, best, c);
          for (std::size_t k = 1; k < size_; ++k) {
            const std::size_t p = l * stride_ + k;
            if (x(b, p, c) > value) {
              value = x(b, p, c);
              best = p;
            }
          }
          const std::size_t idx = (b * out_len + l) * ch + c;
          y[idx] = value;
          argmax_[idx] = (b * len + best) * ch + c;
        }
      }
    }
    cached_ = true;
    return y;
  }

  BasicTensor<T> backward(const BasicTensor<T>& dy) {
    detail::require_cache(cached_, "maxpool");
    if (dy.size() != argmax_.size()) throw DimensionError("maxpool: gradient shape mismatch");
    BasicTensor<T> dx(in_shape_);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax_[i]] += dy[i];
    return dx;
  }

 private:
  std::size_t size_, stride_;
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------

/// Inverted dropout: surviving activations are scaled by 1/(1-rate) in train
/// mode; eval mode is the identity.
template <typename T>
class Dropout {
 public:
  explicit Dropout(double rate = 0.3) : rate_(rate) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
  }

  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode, Rng& rng) {
    active_ = mode == Mode::train && rate_ > 0.0;
    cached_ = true;
    if (!active_) return x;
    mask_ = BasicTensor<T>(x.shape());
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
    for (auto& m : mask_.data()) m = uniform01(rng) < rate_ ? T{0} : keep_scale;
    return elementwise(ElementOp::mul, x, mask_);
  }

  BasicTensor<T> backward(const BasicTensor<T>& dy) {
    detail::require_cache(cached_, "dropout");
    if (!active_) return dy;
    return elementwise(ElementOp::mul, dy, mask_);
  }

  double rate() const { return rate_; }

 private:
  double rate_;
  bool active_ = false;
  bool cached_ = false;
  BasicTensor<T> mask_;
};

// ---------------------------------------------------------------------------

/// Fully connected layer. weight: [out x in]; x: [B x in].
template <typename T>
class Dense {
 public:
  Dense(std::size_t in, std::size_t out, const std::string& prefix = "fc")
      : in_(in), out_(out), weight(prefix + ".weight", {out, in}), bias(prefix + ".bias", {out}) {}

  void init(double gain_sq, Rng& rng) {
    fill_normal(weight.value, std::sqrt(gain_sq / static_cast<double>(in_)), rng);
    bias.value.fill(T{0});
  }

  BasicTensor<T> forward(const BasicTensor<T>& x) {
    if (x.rank() != 2 || x.dim(1) != in_) {
      throw DimensionError(weight.name + ": expected [B x " + std::to_string(in_) + "], got " +
                           shape_string(x.shape()));
    }
    input_ = x;
    cached_ = true;
    const std::size_t batch = x.dim(0);
    BasicTensor<T> y({batch, out_});
    parallel_for(batch, [&](std::size_t b0, std::size_t b1) {
      for (std::size_t b = b0; b < b1; ++b) {
        const T* xr = &x(b, 0);
        for (std::size_t o = 0; o < out_; ++o) {
          const T* w = &weight.value(o, 0);
          T acc = 0;
          for (std::size_t j = 0; j < in_; ++j) acc += w[j] * xr[j];
          y(b, o) = acc + bias.value[o];
        }
      }
    });
    return y;
  }

  BasicTensor<T> backward(const BasicTensor<T>& dy) {
    detail::require_cache(cached_, "dense");
    const BasicTensor<T>& x = input_;
    const std::size_t batch = x.dim(0);
    if (dy.shape() != Shape{batch, out_}) {
      throw DimensionError(weight.name + ": gradient shape " + shape_string(dy.shape()));
    }
    parallel_for(out_, [&](std::size_t o0, std::size_t o1) {
      for (std::size_t o = o0; o < o1; ++o) {
        T* gw = &weight.grad(o, 0);
        std::fill(gw, gw + in_, T{0});
        T gb = 0;
        for (std::size_t b = 0; b < batch; ++b) {
          const T g = dy(b, o);
          gb += g;
          const T* xr = &x(b, 0);
          for (std::size_t j = 0; j < in_; ++j) gw[j] += g * xr[j];
        }
        bias.grad[o] = gb;
      }
    });
    BasicTensor<T> dx(x.shape());
    parallel_for(batch, [&](std::size_t b0, std::size_t b1) {
      for (std::size_t b = b0; b < b1; ++b) {
        T* dxr = &dx(b, 0);
        for (std::size_t o = 0; o < out_; ++o) {
          const T g = dy(b, o);
          const T* w = &weight.value(o, 0);
          for (std::size_t j = 0; j < in_; ++j) dxr[j] += g * w[j];
        }
      }
    });
    return dx;
  }

  std::vector<Parameter<T>*> parameters() { return {&weight, &bias}; }

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

 private:
  std::size_t in_, out_;

 public:
  Parameter<T> weight;
  Parameter<T> bias;

 private:
  BasicTensor<T> input_;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------

template <typename T>
struct LossResult {
  double loss = 0.0;
  BasicTensor<T> grad;
};

/// Mean over all elements of (pred - target)^2; gradient 2(pred - target)/count.
template <typename T>
LossResult<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("mse: prediction " + shape_string(pred.shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  LossResult<T> out;
  out.grad = BasicTensor<T>(pred.shape());
  const double count = static_cast<double>(pred.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += d * d;
    out.grad[i] = static_cast<T>(2.0 * d / count);
  }
  out.loss = acc / count;
  return out;
}

}  // namespace emgkin
