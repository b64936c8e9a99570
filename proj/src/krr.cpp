#include "emgkin/krr.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "emgkin/error.hpp"
#include "emgkin/metrics.hpp"

namespace emgkin {
namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix to_eigen(const Tensor64& t) {
  return Eigen::Map<const Matrix>(t.data().data(), static_cast<Eigen::Index>(t.dim(0)),
                                  static_cast<Eigen::Index>(t.dim(1)));
}

void check_xy(const Tensor64& x, const Tensor64& y) {
  if (x.rank() != 2 || y.rank() != 2 || x.dim(0) != y.dim(0)) {
    throw DimensionError("krr: inputs " + shape_string(x.shape()) + " and targets " +
                         shape_string(y.shape()) + " disagree");
  }
}

// Solves (K + lambda I) alpha = rhs in place; K is overwritten.
Matrix solve_system(Matrix k, const Matrix& rhs, double lambda) {
  k.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(k);
  const auto fail = [&] {
    throw SolverError("kernel system is singular at lambda = " + std::to_string(lambda) +
                      "; use a regularization strength lambda > 0");
  };
  if (llt.info() != Eigen::Success) fail();
  Matrix alpha = llt.solve(rhs);
  if (!alpha.allFinite()) fail();
  const double scale = std::max(rhs.norm(), 1e-300);
  if ((k * alpha - rhs).norm() > 1e-6 * scale) fail();
  return alpha;
}

Matrix gram(const Matrix& x, double gamma) {
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Matrix d = (-2.0 * x * x.transpose()).eval();
  d.colwise() += sq;
  d.rowwise() += sq.transpose();
  // Exact zero distance on the diagonal; clamp rounding below zero.
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return (-gamma * d).array().exp().matrix();
}

}  // namespace

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  if (a.size() != b.size()) throw DimensionError("rbf_kernel: length mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return std::exp(-gamma * d);
}

Tensor64 kernel_matrix(const Tensor64& x, double gamma) {
  if (x.rank() != 2) throw DimensionError("kernel_matrix expects a matrix");
  const Matrix k = gram(to_eigen(x), gamma);
  return Tensor64({x.dim(0), x.dim(0)}, std::vector<double>(k.data(), k.data() + k.size()));
}

KrrModel fit_krr(const Tensor64& x, const Tensor64& y, double gamma, double lambda) {
  check_xy(x, y);
  if (!(gamma > 0.0)) throw ConfigError("krr: gamma must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("krr: lambda must be >= 0");
  Matrix ym = to_eigen(y);
  const Eigen::RowVectorXd mean = ym.colwise().mean();
  ym.rowwise() -= mean;
  const Matrix alpha = solve_system(gram(to_eigen(x), gamma), ym, lambda);

  KrrModel m;
  m.support = x;
  m.dual = Tensor64({y.dim(0), y.dim(1)},
                    std::vector<double>(alpha.data(), alpha.data() + alpha.size()));
  m.gamma = gamma;
  m.lambda = lambda;
  m.target_mean.assign(mean.data(), mean.data() + mean.size());
  return m;
}

std::vector<double> predict(const KrrModel& model, std::span<const double> query) {
  const std::size_t d = model.dual.dim(1);
  std::vector<double> out(model.target_mean);
  for (std::size_t i = 0; i < model.support.dim(0); ++i) {
    const double k = rbf_kernel(model.support.row(i), query, model.gamma);
    for (std::size_t j = 0; j < d; ++j) out[j] += model.dual(i, j) * k;
  }
  return out;
}

Tensor64 predict_rows(const KrrModel& model, const Tensor64& queries) {
  if (queries.rank() != 2 || queries.dim(1) != model.support.dim(1)) {
    throw DimensionError("krr: query shape " + shape_string(queries.shape()) +
                         " does not match support " + shape_string(model.support.shape()));
  }
  Tensor64 out({queries.dim(0), model.dual.dim(1)});
  for (std::size_t q = 0; q < queries.dim(0); ++q) {
    const auto p = predict(model, queries.row(q));
    for (std::size_t j = 0; j < p.size(); ++j) out(q, j) = p[j];
  }
  return out;
}

namespace {

double cv_score(const Matrix& k_full, const Matrix& y, double lambda, std::size_t folds) {
  const auto m = static_cast<std::size_t>(k_full.rows());
  double total = 0.0;
  std::size_t scored = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t lo = f * m / folds;
    const std::size_t hi = (f + 1) * m / folds;
    std::vector<Eigen::Index> train;
    for (std::size_t i = 0; i < m; ++i) {
      if (i < lo || i >= hi) train.push_back(static_cast<Eigen::Index>(i));
    }
    std::vector<Eigen::Index> val;
    for (std::size_t i = lo; i < hi; ++i) val.push_back(static_cast<Eigen::Index>(i));
    Matrix ytr = y(train, Eigen::all);
    const Eigen::RowVectorXd mean = ytr.colwise().mean();
    ytr.rowwise() -= mean;
    Matrix alpha;
    try {
      alpha = solve_system(k_full(train, train), ytr, lambda);
    } catch (const SolverError&) {
      return -std::numeric_limits<double>::infinity();
    }
    Matrix pred = k_full(val, train) * alpha;
    pred.rowwise() += mean;
    const Matrix yval = y(val, Eigen::all);
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      const Eigen::VectorXd t = yval.col(j);
      const Eigen::VectorXd e = pred.col(j);
      try {
        total += r_squared({t.data(), static_cast<std::size_t>(t.size())},
                           {e.data(), static_cast<std::size_t>(e.size())});
        ++scored;
      } catch (const UndefinedMetricError&) {
        // constant target in this fold carries no information
      }
    }
  }
  if (scored == 0) throw UndefinedMetricError("krr tuning: every validation fold is constant");
  return total / static_cast<double>(scored);
}

void check_folds(const Tensor64& x, std::size_t folds) {
  if (folds < 2) throw ConfigError("krr tuning needs at least two folds");
  if (x.dim(0) < 2 * folds) {
    throw InsufficientDataError("krr tuning: " + std::to_string(x.dim(0)) +
                                " samples are too few for " + std::to_string(folds) + " folds");
  }
}

}  // namespace

double cross_validate_krr(const Tensor64& x, const Tensor64& y, double gamma, double lambda,
                          std::size_t folds) {
  check_xy(x, y);
  check_folds(x, folds);
  return cv_score(gram(to_eigen(x), gamma), to_eigen(y), lambda, folds);
}

KrrTuning tune_krr(const Tensor64& x, const Tensor64& y, const KrrGrid& grid, std::size_t folds) {
  check_xy(x, y);
  check_folds(x, folds);
  if (grid.gammas.empty() || grid.lambdas.empty()) throw ConfigError("krr grid is empty");
  const Matrix xm = to_eigen(x);
  const Matrix ym = to_eigen(y);
  KrrTuning best;
  best.score = -std::numeric_limits<double>::infinity();
  bool have = false;
  for (double gamma : grid.gammas) {
    const Matrix k = gram(xm, gamma);
    for (double lambda : grid.lambdas) {
      const double s = cv_score(k, ym, lambda, folds);
      bool better = !have || s > best.score;
      if (have && s == best.score) {
        better = gamma < best.gamma || (gamma == best.gamma && lambda > best.lambda);
      }
      if (better) {
        best = {gamma, lambda, s};
        have = true;
      }
    }
  }
  return best;
}

}  // namespace emgkin
