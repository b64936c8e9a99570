#include "emgkin/metrics.hpp"

#include <string>

#include "emgkin/error.hpp"

namespace emgkin {

double r_squared(std::span<const double> truth, std::span<const double> estimate) {
  if (truth.size() != estimate.size()) {
    throw DimensionError("r_squared: " + std::to_string(truth.size()) + " targets vs " +
                         std::to_string(estimate.size()) + " estimates");
  }
  if (truth.size() < 2) throw UndefinedMetricError("r_squared needs at least two samples");
  const double n = static_cast<double>(truth.size());
  double mt = 0.0, me = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    mt += truth[i];
    me += truth[i] - estimate[i];
  }
  mt /= n;
  me /= n;
  double vt = 0.0, ve = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double a = truth[i] - mt;
    const double e = truth[i] - estimate[i] - me;
    vt += a * a;
    ve += e * e;
  }
  if (vt == 0.0) throw UndefinedMetricError("r_squared: target has zero variance");
  return 1.0 - ve / vt;
}

}  // namespace emgkin
