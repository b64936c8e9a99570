#include "emgkin/lstm.hpp"

namespace emgkin {

std::vector<FeatureSequence> build_sequences(const Tensor& features, const Tensor64& labels,
                                             std::size_t k) {
  if (k == 0) throw ConfigError("time-steps k must be >= 1");
  if (features.rank() != 2 || labels.rank() != 2 || features.dim(0) != labels.dim(0)) {
    throw DimensionError("features " + shape_string(features.shape()) + " and labels " +
                         shape_string(labels.shape()) + " must be [M x .] with equal M");
  }
  const std::size_t m = features.dim(0);
  if (m < k) {
    throw InsufficientDataError(std::to_string(m) + " feature vectors cannot form a sequence of " +
                                std::to_string(k) + " time-steps");
  }
  std::vector<FeatureSequence> out;
  out.reserve(sequence_count(m, k));
  for (std::size_t i = 0; i + k <= m; ++i) {
    FeatureSequence s;
    s.features = slice(features, 0, i, i + k);
    s.end_index = i + k - 1;
    s.target = slice(labels, 0, s.end_index, s.end_index + 1).reshape({labels.dim(1)});
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace emgkin
