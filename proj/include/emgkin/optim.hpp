#pragma once

// SGD with momentum and Adam, both driven by a step-decay learning rate.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "emgkin/layers.hpp"

namespace emgkin {

enum class OptimizerKind { sgdm, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgdm;
  double lr0 = 1e-4;
  double decay_factor = 0.1;  // multiply by this every `decay_every` epochs
  std::size_t decay_every = 10;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 128;
  std::size_t epochs = 50;

  void validate() const {
    if (!(lr0 > 0.0)) throw ConfigError("learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
    if (batch_size == 0 || epochs == 0 || decay_every == 0) {
      throw ConfigError("batch size, epochs and decay period must be positive");
    }
  }

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

/// lr0 * decay_factor^floor(epoch / decay_every), epoch 0-based.
inline double lr_at(const OptimizerConfig& config, std::size_t epoch) {
  return config.lr0 *
         std::pow(config.decay_factor, static_cast<double>(epoch / config.decay_every));
}

/// v <- momentum * v - lr * g;  theta <- theta + v
template <typename T>
class Sgdm {
 public:
  explicit Sgdm(double momentum = 0.9) : momentum_(momentum) {}

  void step(std::span<Parameter<T>* const> params, double lr) {
    if (velocity_.empty()) {
      for (auto* p : params) velocity_.emplace_back(p->value.shape());
    }
    if (velocity_.size() != params.size()) throw UsageError("sgdm: parameter list changed");
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& value = params[k]->value;
      const auto& grad = params[k]->grad;
      auto& v = velocity_[k];
      if (v.shape() != value.shape() || grad.shape() != value.shape()) {
        throw DimensionError("sgdm: slot shape mismatch for " + params[k]->name);
      }
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double vi = momentum_ * v[i] - lr * grad[i];
        v[i] = static_cast<T>(vi);
        value[i] = static_cast<T>(value[i] + vi);
      }
    }
  }

  const std::vector<BasicTensor<T>>& velocity() const { return velocity_; }

 private:
  double momentum_;
  std::vector<BasicTensor<T>> velocity_;
};

/// Bias-corrected Adam.
template <typename T>
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  void step(std::span<Parameter<T>* const> params, double lr) {
    if (first_.empty()) {
      for (auto* p : params) {
        first_.emplace_back(p->value.shape());
        second_.emplace_back(p->value.shape());
      }
    }
    if (first_.size() != params.size()) throw UsageError("adam: parameter list changed");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& value = params[k]->value;
      const auto& grad = params[k]->grad;
      if (grad.shape() != value.shape() || first_[k].shape() != value.shape()) {
        throw DimensionError("adam: slot shape mismatch for " + params[k]->name);
      }
      auto& m = first_[k];
      auto& v = second_[k];
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double g = grad[i];
        const double mi = beta1_ * m[i] + (1.0 - beta1_) * g;
        const double vi = beta2_ * v[i] + (1.0 - beta2_) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double mhat = mi / c1;
        const double vhat = vi / c2;
        value[i] = static_cast<T>(value[i] - lr * mhat / (std::sqrt(vhat) + epsilon_));
      }
    }
  }

  std::size_t steps() const { return t_; }

 private:
  double beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
  std::vector<BasicTensor<T>> first_;
  std::vector<BasicTensor<T>> second_;
};

}  // namespace emgkin
