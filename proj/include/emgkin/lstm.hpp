#pragma once

// Single-layer LSTM regressor over deep-feature sequences. Per step j:
//
//   x_j = [h_{j-1}, f_j]
//   i_j = sigmoid(W_i x_j + b_i)        input gate
//   m_j = sigmoid(W_m x_j + b_m)        forget gate
//   o_j = sigmoid(W_o x_j + b_o)        output gate
//   c_j = i_j * tanh(W_c x_j + b_c) + m_j * c_{j-1}
//   h_j = o_j * tanh(c_j)
//   y_j = W_y h_j + b_y
//
// Only y_k of a k-step sequence is read out. (h_0, c_0) are fixed at zero.

#include <cstdint>
#include <vector>

#include "emgkin/layers.hpp"

namespace emgkin {

template <typename T>
struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::size_t outputs = 0;
  Parameter<T> w_i, w_m, w_o, w_c;  // [hidden x (hidden + input_dim)]
  Parameter<T> b_i, b_m, b_o, b_c;  // [hidden]
  Parameter<T> w_y;                 // [outputs x hidden]
  Parameter<T> b_y;                 // [outputs]

  LstmParams() = default;
  LstmParams(std::size_t input, std::size_t hidden_units, std::size_t out)
      : input_dim(input),
        hidden(hidden_units),
        outputs(out),
        w_i("lstm.w_i", {hidden_units, hidden_units + input}),
        w_m("lstm.w_m", {hidden_units, hidden_units + input}),
        w_o("lstm.w_o", {hidden_units, hidden_units + input}),
        w_c("lstm.w_c", {hidden_units, hidden_units + input}),
        b_i("lstm.b_i", {hidden_units}),
        b_m("lstm.b_m", {hidden_units}),
        b_o("lstm.b_o", {hidden_units}),
        b_c("lstm.b_c", {hidden_units}),
        w_y("lstm.w_y", {out, hidden_units}),
        b_y("lstm.b_y", {out}) {
    if (input == 0 || hidden_units == 0 || out == 0) throw ConfigError("LSTM sizes must be positive");
  }

  /// Uniform fan-in initialization; forget-gate bias starts at 1.
  static LstmParams initialized(std::size_t input, std::size_t hidden_units, std::size_t out,
                                std::uint64_t seed) {
    LstmParams p(input, hidden_units, out);
    Rng rng(seed);
    const double gate_limit = 1.0 / std::sqrt(static_cast<double>(hidden_units + input));
    for (auto* w : {&p.w_i, &p.w_m, &p.w_o, &p.w_c}) fill_uniform(w->value, gate_limit, rng);
    fill_uniform(p.w_y.value, 1.0 / std::sqrt(static_cast<double>(hidden_units)), rng);
    p.b_m.value.fill(T{1});
    return p;
  }

  std::vector<Parameter<T>*> parameters() {
    return {&w_i, &w_m, &w_o, &w_c, &b_i, &b_m, &b_o, &b_c, &w_y, &b_y};
  }
  std::vector<const Parameter<T>*> parameters() const {
    return {&w_i, &w_m, &w_o, &w_c, &b_i, &b_m, &b_o, &b_c, &w_y, &b_y};
  }
  std::vector<NamedTensor<T>> state() {
    std::vector<NamedTensor<T>> out;
    for (auto* p : parameters()) out.push_back({p->name, &p->value});
    return out;
  }
  void zero_grad() {
    for (auto* p : parameters()) p->grad.fill(T{0});
  }
};

template <typename T>
struct LstmState {
  BasicTensor<T> h;  // [hidden]
  BasicTensor<T> c;  // [hidden]

  static LstmState zeros(std::size_t hidden) {
    return {BasicTensor<T>({hidden}), BasicTensor<T>({hidden})};
  }
};

template <typename T>
struct LstmStepResult {
  LstmState<T> state;
  BasicTensor<T> y;  // [outputs]
  BasicTensor<T> input_gate, forget_gate, output_gate;
};

/// One update of a single sequence.
template <typename T>
LstmStepResult<T> lstm_step(const LstmParams<T>& p, const LstmState<T>& prev,
                            const BasicTensor<T>& f) {
  if (f.size() != p.input_dim || prev.h.size() != p.hidden || prev.c.size() != p.hidden) {
    throw DimensionError("lstm_step: feature " + shape_string(f.shape()) + " / state sizes do not match params (input " +
                         std::to_string(p.input_dim) + ", hidden " + std::to_string(p.hidden) + ")");
  }
  const std::size_t h = p.hidden;
  const auto x = concat<T>({prev.h.reshape({h}), f.reshape({p.input_dim})}).reshape({h + p.input_dim, 1});
  const auto affine = [&](const Parameter<T>& w, const Parameter<T>& b) {
    return elementwise(ElementOp::add, matmul(w.value, x).reshape({h}), b.value);
  };
  LstmStepResult<T> r;
  r.input_gate = elementwise(ElementOp::sigmoid, affine(p.w_i, p.b_i));
  r.forget_gate = elementwise(ElementOp::sigmoid, affine(p.w_m, p.b_m));
  r.output_gate = elementwise(ElementOp::sigmoid, affine(p.w_o, p.b_o));
  const auto candidate = elementwise(ElementOp::tanh, affine(p.w_c, p.b_c));
  r.state.c = elementwise(ElementOp::add, elementwise(ElementOp::mul, r.input_gate, candidate),
                          elementwise(ElementOp::mul, r.forget_gate, prev.c));
  r.state.h = elementwise(ElementOp::mul, r.output_gate, elementwise(ElementOp::tanh, r.state.c));
  r.y = elementwise(ElementOp::add, matmul(p.w_y.value, r.state.h.reshape({h, 1})).reshape({p.outputs}),
                    p.b_y.value);
  return r;
}

/// Batched unrolled LSTM with cached activations for backpropagation through
/// time. Inputs are [B x k x input_dim]; outputs are y_k, [B x outputs].
template <typename T>
class LstmRegressor {
 public:
  explicit LstmRegressor(double dropout = 0.3) : dropout_(dropout) {
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
  }

  BasicTensor<T> forward(const LstmParams<T>& p, const BasicTensor<T>& seqs, Mode mode, Rng& rng) {
    if (seqs.rank() != 3 || seqs.dim(2) != p.input_dim) {
      throw DimensionError("lstm: expected [B x k x " + std::to_string(p.input_dim) + "], got " +
                           shape_string(seqs.shape()));
    }
    const std::size_t batch = seqs.dim(0), steps = seqs.dim(1), hid = p.hidden;
    const std::size_t width = hid + p.input_dim;
    steps_.assign(steps, Step{});
    BasicTensor<T> h({batch, hid});
    BasicTensor<T> c({batch, hid});
    for (std::size_t j = 0; j < steps; ++j) {
      Step& s = steps_[j];
      s.x = BasicTensor<T>({batch, width});
      for (std::size_t b = 0; b < batch; ++b) {
        std::copy_n(&h(b, 0), hid, &s.x(b, 0));
        std::copy_n(&seqs(b, j, 0), p.input_dim, &s.x(b, hid));
      }
      s.c_prev = c;
      s.i = affine(s.x, p.w_i, p.b_i);
      s.m = affine(s.x, p.w_m, p.b_m);
      s.o = affine(s.x, p.w_o, p.b_o);
      s.g = affine(s.x, p.w_c, p.b_c);
      s.tanh_c = BasicTensor<T>({batch, hid});
      for (std::size_t e = 0; e < batch * hid; ++e) {
        s.i[e] = sigmoid(s.i[e]);
        s.m[e] = sigmoid(s.m[e]);
        s.o[e] = sigmoid(s.o[e]);
        s.g[e] = std::tanh(s.g[e]);
        c[e] = s.i[e] * s.g[e] + s.m[e] * c[e];
        s.tanh_c[e] = std::tanh(c[e]);
        h[e] = s.o[e] * s.tanh_c[e];
      }
    }
    // Dropout on the hidden state entering the readout.
    mask_ = BasicTensor<T>({batch, hid}, T{1});
    if (mode == Mode::train && dropout_ > 0.0) {
      const T keep_scale = static_cast<T>(1.0 / (1.0 - dropout_));
      for (auto& v : mask_.data()) v = uniform01(rng) < dropout_ ? T{0} : keep_scale;
    }
    readout_in_ = elementwise(ElementOp::mul, h, mask_);
    last_h_ = h;
    BasicTensor<T> y({batch, p.outputs});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t d = 0; d < p.outputs; ++d) {
        T acc = p.b_y.value[d];
        for (std::size_t u = 0; u < hid; ++u) acc += p.w_y.value(d, u) * readout_in_(b, u);
        y(b, d) = acc;
      }
    }
    batch_ = batch;
    cached_ = true;
    return y;
  }

  /// Fills every gradient in `p` from d(loss)/d(y_k).
  void backward(LstmParams<T>& p, const BasicTensor<T>& dy) {
    if (!cached_) throw UsageError("lstm: backward called without a cached forward pass");
    const std::size_t batch = batch_, hid = p.hidden;
    if (dy.shape() != Shape{batch, p.outputs}) {
      throw DimensionError("lstm: gradient shape " + shape_string(dy.shape()));
    }
    p.zero_grad();
    for (std::size_t d = 0; d < p.outputs; ++d) {
      T gb = 0;
      for (std::size_t b = 0; b < batch; ++b) {
        gb += dy(b, d);
        for (std::size_t u = 0; u < hid; ++u) p.w_y.grad(d, u) += dy(b, d) * readout_in_(b, u);
      }
      p.b_y.grad[d] = gb;
    }
    BasicTensor<T> dh({batch, hid});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t u = 0; u < hid; ++u) {
        T acc = 0;
        for (std::size_t d = 0; d < p.outputs; ++d) acc += dy(b, d) * p.w_y.value(d, u);
        dh(b, u) = acc * mask_(b, u);
      }
    }
    BasicTensor<T> dc({batch, hid});
    BasicTensor<T> dz_i({batch, hid}), dz_m({batch, hid}), dz_o({batch, hid}), dz_c({batch, hid});
    for (std::size_t jj = steps_.size(); jj-- > 0;) {
      const Step& s = steps_[jj];
      for (std::size_t e = 0; e < batch * hid; ++e) {
        const T tc = s.tanh_c[e];
        const T d_o = dh[e] * tc;
        const T dce = dc[e] + dh[e] * s.o[e] * (T{1} - tc * tc);
        const T d_i = dce * s.g[e];
        const T d_g = dce * s.i[e];
        const T d_m = dce * s.c_prev[e];
        dc[e] = dce * s.m[e];
        dz_i[e] = d_i * s.i[e] * (T{1} - s.i[e]);
        dz_m[e] = d_m * s.m[e] * (T{1} - s.m[e]);
        dz_o[e] = d_o * s.o[e] * (T{1} - s.o[e]);
        dz_c[e] = d_g * (T{1} - s.g[e] * s.g[e]);
      }
      accumulate_weight_grad(p.w_i, p.b_i, dz_i, s.x);
      accumulate_weight_grad(p.w_m, p.b_m, dz_m, s.x);
      accumulate_weight_grad(p.w_o, p.b_o, dz_o, s.x);
      accumulate_weight_grad(p.w_c, p.b_c, dz_c, s.x);
      if (jj == 0) break;
      // dh_{j-1} = first `hid` columns of sum_g dZ_g W_g.
      parallel_for(batch, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
          for (std::size_t v = 0; v < hid; ++v) dh(b, v) = T{0};
          for (std::size_t u = 0; u < hid; ++u) {
            const T gi = dz_i(b, u), gm = dz_m(b, u), go = dz_o(b, u), gc = dz_c(b, u);
            const T* wi = &p.w_i.value(u, 0);
            const T* wm = &p.w_m.value(u, 0);
            const T* wo = &p.w_o.value(u, 0);
            const T* wc = &p.w_c.value(u, 0);
            T* out = &dh(b, 0);
            for (std::size_t v = 0; v < hid; ++v) {
              out[v] += gi * wi[v] + gm * wm[v] + go * wo[v] + gc * wc[v];
            }
          }
        }
      });
    }
  }

  /// Hidden state h_k of the last forward pass (before dropout), [B x hidden].
  const BasicTensor<T>& last_hidden() const { return last_h_; }

 private:
  struct Step {
    BasicTensor<T> x;       // [B x (hidden + input)]
    BasicTensor<T> c_prev;  // [B x hidden]
    BasicTensor<T> i, m, o, g, tanh_c;
  };

  static BasicTensor<T> affine(const BasicTensor<T>& x, const Parameter<T>& w,
                               const Parameter<T>& b) {
    const std::size_t batch = x.dim(0), width = x.dim(1), rows = w.value.dim(0);
    BasicTensor<T> z({batch, rows});
    parallel_for(batch, [&](std::size_t b0, std::size_t b1) {
      for (std::size_t bi = b0; bi < b1; ++bi) {
        const T* xr = &x(bi, 0);
        for (std::size_t u = 0; u < rows; ++u) {
          const T* wr = &w.value(u, 0);
          T acc = b.value[u];
          for (std::size_t j = 0; j < width; ++j) acc += wr[j] * xr[j];
          z(bi, u) = acc;
        }
      }
    });
    return z;
  }

  static void accumulate_weight_grad(Parameter<T>& w, Parameter<T>& b, const BasicTensor<T>& dz,
                                     const BasicTensor<T>& x) {
    const std::size_t batch = x.dim(0), width = x.dim(1), rows = w.value.dim(0);
    parallel_for(rows, [&](std::size_t u0, std::size_t u1) {
      for (std::size_t u = u0; u < u1; ++u) {
        T* gw = &w.grad(u, 0);
        T gb = 0;
        for (std::size_t bi = 0; bi < batch; ++bi) {
          const T g = dz(bi, u);
          gb += g;
          const T* xr = &x(bi, 0);
          for (std::size_t j = 0; j < width; ++j) gw[j] += g * xr[j];
        }
        b.grad[u] += gb;
      }
    });
  }

  double dropout_;
  std::vector<Step> steps_;
  BasicTensor<T> mask_;
  BasicTensor<T> readout_in_;
  BasicTensor<T> last_h_;
  std::size_t batch_ = 0;
  bool cached_ = false;
};

/// y_k for one sequence [k x input_dim]. Train mode applies readout dropout.
template <typename T>
BasicTensor<T> lstm_forward(const LstmParams<T>& p, const BasicTensor<T>& sequence, Mode mode,
                            Rng& rng, double dropout = 0.3) {
  if (sequence.rank() != 2 || sequence.dim(0) == 0) {
    throw InsufficientDataError("lstm_forward needs a non-empty [k x features] sequence");
  }
  LstmRegressor<T> net(dropout);
  const auto y = net.forward(p, sequence.reshape({1, sequence.dim(0), sequence.dim(1)}), mode, rng);
  return y.reshape({p.outputs});
}

struct FeatureSequence {
  Tensor features;  // [k x feature_dim]
  Tensor64 target;  // [D], label of the last window
  std::size_t end_index = 0;  // index of the last window in segmentation order
};

/// Overlapping stride-1 sequences: the one starting at window i covers
/// windows [i, i + k) and takes the label of window i + k - 1.
std::vector<FeatureSequence> build_sequences(const Tensor& features, const Tensor64& labels,
                                             std::size_t k);

inline std::size_t sequence_count(std::size_t windows, std::size_t k) {
  return (k == 0 || windows < k) ? 0 : windows - k + 1;
}

}  // namespace emgkin
