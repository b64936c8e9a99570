#pragma once

// Kernel ridge regression with an RBF kernel, k(a, b) = exp(-gamma |a - b|^2).
// Targets are centered on their training mean; the dual coefficients solve
// (K + lambda I) alpha = Y - mean.

#include <span>
#include <vector>

#include "emgkin/tensor.hpp"

namespace emgkin {

struct KrrModel {
  Tensor64 support;  // [M x F]
  Tensor64 dual;     // [M x D]
  double gamma = 1.0;
  double lambda = 0.0;
  std::vector<double> target_mean;  // [D]
};

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

/// Gram matrix of the rows of x, [M x M].
Tensor64 kernel_matrix(const Tensor64& x, double gamma);

/// Throws SolverError when K + lambda I is singular (e.g. duplicate rows with
/// lambda == 0).
KrrModel fit_krr(const Tensor64& x, const Tensor64& y, double gamma, double lambda);

/// mean + sum_i alpha_i k(x_i, query)
std::vector<double> predict(const KrrModel& model, std::span<const double> query);
Tensor64 predict_rows(const KrrModel& model, const Tensor64& queries);

struct KrrGrid {
  std::vector<double> gammas{1e-3, 1e-2, 1e-1, 1.0, 10.0};
  std::vector<double> lambdas{1e-6, 3.1622776601683795e-5, 1e-3, 3.1622776601683794e-2, 1.0};
};

struct KrrTuning {
  double gamma = 0.0;
  double lambda = 0.0;
  double score = 0.0;  // mean inner-validation R^2
};

/// Grid search with contiguous k-fold inner cross-validation. Ties prefer the
/// smaller gamma, then the larger lambda.
KrrTuning tune_krr(const Tensor64& x, const Tensor64& y, const KrrGrid& grid = {},
                   std::size_t folds = 5);

/// Mean inner-validation R^2 of one grid point.
double cross_validate_krr(const Tensor64& x, const Tensor64& y, double gamma, double lambda,
                          std::size_t folds = 5);

}  // namespace emgkin
