#include "emgkin/features.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <iostream>

#include "emgkin/error.hpp"

namespace emgkin {

std::vector<double> HandcraftedVector::flatten() const {
  std::vector<double> out;
  out.reserve(channels.size() * kFeaturesPerChannel);
  for (const auto& c : channels) {
    out.push_back(c.mav);
    out.push_back(c.rms);
    out.push_back(c.var);
    out.insert(out.end(), c.ar.begin(), c.ar.end());
  }
  return out;
}

bool fit_autoregressive(std::span<const double> x, std::span<double> coefficients) {
  const std::size_t order = coefficients.size();
  std::fill(coefficients.begin(), coefficients.end(), 0.0);
  const std::size_t n = x.size();
  if (n <= order) return false;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);

  std::vector<double> r(order + 1, 0.0);
  for (std::size_t lag = 0; lag <= order; ++lag) {
    double acc = 0.0;
    for (std::size_t t = lag; t < n; ++t) acc += (x[t] - mean) * (x[t - lag] - mean);
    r[lag] = acc / static_cast<double>(n);
  }
  // Rounding leaves ~1e-32 of variance in a constant series; treat that as none.
  if (!(r[0] > 0.0) || r[0] <= 1e-20 * mean * mean) return false;

  std::vector<double> a(order + 1, 0.0);  // a[1..order]
  std::vector<double> prev(order + 1, 0.0);
  double error = r[0];
  for (std::size_t m = 1; m <= order; ++m) {
    double acc = r[m];
    for (std::size_t i = 1; i < m; ++i) acc -= a[i] * r[m - i];
    const double k = acc / error;
    prev = a;
    a[m] = k;
    for (std::size_t i = 1; i < m; ++i) a[i] = prev[i] - k * prev[m - i];
    error *= (1.0 - k * k);
    if (!(error > 0.0)) break;
  }
  for (std::size_t i = 0; i < order; ++i) coefficients[i] = a[i + 1];
  return true;
}

HandcraftedVector extract_features(const Tensor64& window) {
  if (window.rank() != 2) throw DimensionError("window must be [samples x channels]");
  const std::size_t t = window.dim(0);
  const std::size_t n = window.dim(1);
  HandcraftedVector out;
  out.channels.resize(n);
  std::vector<double> column(t);
  for (std::size_t c = 0; c < n; ++c) {
    double abs_sum = 0.0, sq_sum = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
      const double v = window(i, c);
      column[i] = v;
      abs_sum += std::abs(v);
      sq_sum += v * v;
      sum += v;
    }
    const double inv = 1.0 / static_cast<double>(t);
    const double mean = sum * inv;
    auto& f = out.channels[c];
    f.mav = abs_sum * inv;
    f.rms = std::sqrt(sq_sum * inv);
    double centered = 0.0;
    for (double v : column) centered += (v - mean) * (v - mean);
    f.var = centered * inv;
    if (!fit_autoregressive(column, f.ar)) out.degenerate = true;
  }
  return out;
}

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix to_eigen(const Tensor64& t) {
  Matrix m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    for (std::size_t j = 0; j < t.dim(1); ++j) m(i, j) = t(i, j);
  }
  return m;
}

}  // namespace

PcaBasis fit_pca(const Tensor64& rows, const PcaOptions& options) {
  if (rows.rank() != 2) throw DimensionError("PCA input must be [rows x dim]");
  const std::size_t m = rows.dim(0);
  const std::size_t dim = rows.dim(1);
  const std::size_t k = options.components;
  if (k == 0) throw ConfigError("PCA needs at least one component");
  if (m < k + 1) {
    throw InsufficientDataError("PCA to " + std::to_string(k) + " components needs at least " +
                                std::to_string(k + 1) + " vectors, got " + std::to_string(m));
  }
  PcaBasis basis;
  basis.mean.assign(dim, 0.0);
  basis.scale.assign(dim, 1.0);
  Matrix x = to_eigen(rows);
  for (std::size_t j = 0; j < dim; ++j) basis.mean[j] = x.col(j).mean();
  for (std::size_t j = 0; j < dim; ++j) x.col(j).array() -= basis.mean[j];
  if (options.standardize) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double sd = std::sqrt(x.col(j).squaredNorm() / static_cast<double>(m));
      basis.scale[j] = sd > 1e-12 ? sd : 1.0;
      x.col(j) /= basis.scale[j];
    }
  }
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw SolverError("PCA eigendecomposition failed");
  const Eigen::VectorXd values = solver.eigenvalues();  // ascending
  const Eigen::MatrixXd vectors = solver.eigenvectors();
  const double top = std::max(values(static_cast<Eigen::Index>(dim) - 1), 0.0);
  const double floor = std::max(top, 1e-300) * 1e-10;

  basis.components = Tensor64({dim, k});
  basis.explained_variance.assign(k, 0.0);
  for (std::size_t c = 0; c < k && c < dim; ++c) {
    const auto src = static_cast<Eigen::Index>(dim - 1 - c);
    if (!(values(src) > floor)) break;
    // Deterministic sign: largest-magnitude entry positive.
    Eigen::Index arg = 0;
    vectors.col(src).cwiseAbs().maxCoeff(&arg);
    const double sign = vectors(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < dim; ++j) {
      basis.components(j, c) = sign * vectors(static_cast<Eigen::Index>(j), src);
    }
    basis.explained_variance[c] = values(src);
    basis.retained = c + 1;
  }
  if (basis.retained < k) {
    std::cerr << "warning: PCA rank " << basis.retained << " < " << k
              << " requested components; projection padded with zeros\n";
  }
  return basis;
}

std::vector<double> project(const PcaBasis& basis, std::span<const double> v) {
  const std::size_t dim = basis.input_dim();
  if (v.size() != dim) {
    throw DimensionError("PCA input has " + std::to_string(v.size()) + " values, basis expects " +
                         std::to_string(dim));
  }
  const std::size_t k = basis.output_dim();
  std::vector<double> out(k, 0.0);
  for (std::size_t j = 0; j < dim; ++j) {
    const double z = (v[j] - basis.mean[j]) / basis.scale[j];
    for (std::size_t c = 0; c < basis.retained; ++c) out[c] += basis.components(j, c) * z;
  }
  return out;
}

Tensor64 project_rows(const PcaBasis& basis, const Tensor64& rows) {
  const std::size_t m = rows.dim(0);
  Tensor64 out({m, basis.output_dim()});
  for (std::size_t i = 0; i < m; ++i) {
    const auto p = project(basis, rows.row(i));
    std::copy(p.begin(), p.end(), out.row(i).begin());
  }
  return out;
}

std::vector<double> reconstruct(const PcaBasis& basis, std::span<const double> projected) {
  const std::size_t dim = basis.input_dim();
  std::vector<double> out(dim, 0.0);
  for (std::size_t j = 0; j < dim; ++j) {
    double z = 0.0;
    for (std::size_t c = 0; c < basis.retained; ++c) z += basis.components(j, c) * projected[c];
    out[j] = basis.mean[j] + basis.scale[j] * z;
  }
  return out;
}

Tensor64 project_2d(const Tensor64& rows) {
  const auto basis = fit_pca(rows, PcaOptions{2, false});
  return project_rows(basis, rows);
}

}  // namespace emgkin
