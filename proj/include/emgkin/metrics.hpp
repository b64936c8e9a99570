#pragma once

#include <span>

namespace emgkin {

/// Coefficient of determination in variance form:
///   R^2 = 1 - Var(truth - estimate) / Var(truth)
/// with population variances. A constant offset in the estimate does not
/// change the score. Throws UndefinedMetricError when Var(truth) == 0 or
/// fewer than two samples are given.
double r_squared(std::span<const double> truth, std::span<const double> estimate);

}  // namespace emgkin
