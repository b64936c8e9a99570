#pragma once

// Classical per-channel sEMG features (MAV, RMS, VAR, AR(4)) and a PCA
// projection fitted on training vectors.

#include <array>
#include <vector>

#include "emgkin/tensor.hpp"

namespace emgkin {

inline constexpr std::size_t kArOrder = 4;
inline constexpr std::size_t kFeaturesPerChannel = 3 + kArOrder;

struct ChannelFeatures {
  double mav = 0.0;
  double rms = 0.0;
  double var = 0.0;  // population variance
  std::array<double, kArOrder> ar{};  // x_t = sum_i ar[i-1] x_{t-i} + e_t
};

struct HandcraftedVector {
  std::vector<ChannelFeatures> channels;
  bool degenerate = false;  // some channel had a singular AR system

  /// Per channel [mav, rms, var, a1..a4], channels concatenated (7N values).
  std::vector<double> flatten() const;
};

/// AR coefficients of a zero-mean-adjusted series from the biased
/// autocorrelation via Levinson-Durbin. Returns false (and zeros) when the
/// series has no variance.
bool fit_autoregressive(std::span<const double> x, std::span<double> coefficients);

/// window: [samples x N]
HandcraftedVector extract_features(const Tensor64& window);

struct PcaOptions {
  std::size_t components = 20;
  bool standardize = true;  // z-score each input dimension with training stats
};

struct PcaBasis {
  std::vector<double> mean;   // [dim]
  std::vector<double> scale;  // [dim], 1 when not standardizing
  Tensor64 components;        // [dim x components], orthonormal columns
  std::vector<double> explained_variance;  // descending, zero past `retained`
  std::size_t retained = 0;   // columns backed by nonzero variance

  std::size_t input_dim() const { return mean.size(); }
  std::size_t output_dim() const { return components.dim(1); }
};

/// rows: [M x dim]. Needs M > components. When the data has rank below the
/// requested count the basis keeps the available directions, pads with zero
/// columns and prints a warning.
PcaBasis fit_pca(const Tensor64& rows, const PcaOptions& options = {});

/// components^T applied to the standardized, centered v. Output length ==
/// options.components.
std::vector<double> project(const PcaBasis& basis, std::span<const double> v);
Tensor64 project_rows(const PcaBasis& basis, const Tensor64& rows);

/// Inverse map of project for the retained subspace.
std::vector<double> reconstruct(const PcaBasis& basis, std::span<const double> projected);

/// Top-2 principal coordinates of each row (no standardization).
Tensor64 project_2d(const Tensor64& rows);

}  // namespace emgkin
