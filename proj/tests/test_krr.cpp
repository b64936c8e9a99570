#include <doctest.h>

#include "check.hpp"
#include "emgkin/krr.hpp"
#include "emgkin/metrics.hpp"

using namespace emgkin;
using test::random_tensor;

namespace {

Tensor64 toy_targets(const Tensor64& x) {
  Tensor64 y({x.dim(0), 2});
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    y(i, 0) = std::sin(2.0 * x(i, 0)) + x(i, 1);
    y(i, 1) = x(i, 0) * x(i, 2) - 0.5;
  }
  return y;
}

}  // namespace

TEST_CASE("kernel diagonal is exactly one") {
  const Tensor64 k = kernel_matrix(random_tensor({12, 5}, 1), 0.7);
  for (std::size_t i = 0; i < 12; ++i) CHECK(k(i, i) == 1.0);
  CHECK(rbf_kernel(std::vector<double>{1, 2}, std::vector<double>{1, 3}, 0.5) == doctest::Approx(std::exp(-0.5)));
}

TEST_CASE("lambda zero interpolates distinct points") {
  const Tensor64 x = random_tensor({10, 3}, 2);
  const Tensor64 y = toy_targets(x);
  const auto m = fit_krr(x, y, 1.0, 0.0);
  const Tensor64 p = predict_rows(m, x);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(p[i] - y[i]) < 1e-6);
  const auto at = predict(m, x.row(4));
  CHECK(std::abs(at[1] - y(4, 1)) < 1e-6);
}

TEST_CASE("large ridge collapses to the target mean") {
  const Tensor64 x = random_tensor({30, 3}, 3);
  const Tensor64 y = toy_targets(x);
  const auto m = fit_krr(x, y, 1.0, 1e6);
  const Tensor64 p = predict_rows(m, x);
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(p(i, j) - m.target_mean[j]) < 1e-3);
  }
}

TEST_CASE("far-away queries return the mean") {
  const Tensor64 x = random_tensor({20, 2}, 4);
  const auto m = fit_krr(x, toy_targets(Tensor64({20, 3}, 0.3)), 1.0, 1e-3);
  const auto p = predict(m, std::vector<double>{1e4, -1e4});
  CHECK(p[0] == m.target_mean[0]);
}

TEST_CASE("prediction equals a direct dual sum") {
  const Tensor64 x = random_tensor({25, 4}, 5);
  Tensor64 y3 = random_tensor({25, 3}, 6);
  const Tensor64 y = toy_targets(y3);
  const auto m = fit_krr(x, y, 0.3, 1e-2);
  const Tensor64 q = random_tensor({7, 4}, 7);
  const Tensor64 p = predict_rows(m, q);
  for (std::size_t r = 0; r < 7; ++r) {
    for (std::size_t d = 0; d < 2; ++d) {
      double s = m.target_mean[d];
      for (std::size_t i = 0; i < 25; ++i) {
        double dist = 0.0;
        for (std::size_t j = 0; j < 4; ++j) dist += (x(i, j) - q(r, j)) * (x(i, j) - q(r, j));
        s += m.dual(i, d) * std::exp(-0.3 * dist);
      }
      CHECK(std::abs(p(r, d) - s) < 1e-10);
    }
  }
}

TEST_CASE("duplicate points at lambda zero are a solver error") {
  Tensor64 x = random_tensor({6, 2}, 8);
  std::copy(x.row(0).begin(), x.row(0).end(), x.row(3).begin());
  Tensor64 y = toy_targets(Tensor64({6, 3}, 0.1));
  y(3, 0) += 1.0;
  try {
    fit_krr(x, y, 1.0, 0.0);
    FAIL("expected a solver error");
  } catch (const SolverError& e) {
    CHECK(std::string(e.what()).find("lambda > 0") != std::string::npos);
  }
  CHECK_NOTHROW(fit_krr(x, y, 1.0, 1e-3));
}

TEST_CASE("training fit degrades monotonically with the ridge") {
  const Tensor64 x = random_tensor({60, 3}, 9);
  const Tensor64 y = toy_targets(x);
  const KrrGrid grid;
  double previous = 2.0;
  for (double lambda : grid.lambdas) {
    const auto m = fit_krr(x, y, 1.0, lambda);
    const Tensor64 p = predict_rows(m, x);
    std::vector<double> t(60), e(60);
    for (std::size_t i = 0; i < 60; ++i) {
      t[i] = y(i, 0);
      e[i] = p(i, 0);
    }
    const double r2 = r_squared(t, e);
    CHECK(r2 <= previous + 1e-12);
    previous = r2;
  }
}

TEST_CASE("row order does not change predictions") {
  const Tensor64 x = random_tensor({15, 3}, 10);
  const Tensor64 y = toy_targets(x);
  Tensor64 xr(x.shape()), yr(y.shape());
  for (std::size_t i = 0; i < 15; ++i) {
    std::copy(x.row(14 - i).begin(), x.row(14 - i).end(), xr.row(i).begin());
    std::copy(y.row(14 - i).begin(), y.row(14 - i).end(), yr.row(i).begin());
  }
  const Tensor64 q = random_tensor({5, 3}, 11);
  const Tensor64 a = predict_rows(fit_krr(x, y, 0.5, 1e-3), q);
  const Tensor64 b = predict_rows(fit_krr(xr, yr, 0.5, 1e-3), q);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-9);
}

TEST_CASE("tuning picks the best grid member deterministically") {
  const Tensor64 x = random_tensor({80, 3}, 12);
  const Tensor64 y = toy_targets(x);
  const KrrGrid grid;
  const auto t = tune_krr(x, y, grid);
  CHECK(std::find(grid.gammas.begin(), grid.gammas.end(), t.gamma) != grid.gammas.end());
  CHECK(std::find(grid.lambdas.begin(), grid.lambdas.end(), t.lambda) != grid.lambdas.end());
  const auto again = tune_krr(x, y, grid);
  CHECK(again.gamma == t.gamma);
  CHECK(again.lambda == t.lambda);
  for (double g : grid.gammas) {
    for (double l : grid.lambdas) CHECK(cross_validate_krr(x, y, g, l) <= t.score);
  }
  CHECK(cross_validate_krr(x, y, t.gamma, t.lambda) == t.score);
}

TEST_CASE("ties prefer the smaller gamma, then the larger lambda") {
  // Constant features make every gamma give the same kernel and score.
  const Tensor64 x({40, 2}, 1.0);
  Tensor64 y({40, 1});
  for (std::size_t i = 0; i < 40; ++i) y(i, 0) = static_cast<double>(i % 7);
  KrrGrid grid;
  grid.lambdas = {1.0, 1.0};
  const auto t = tune_krr(x, y, grid);
  CHECK(t.gamma == grid.gammas.front());
}
