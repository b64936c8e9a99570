#pragma once

#include <stdexcept>
#include <string>

namespace emgkin {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or layer dimensions disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed or non-finite data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Not enough samples/windows/vectors for the requested operation.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Filter parameters cannot be realized at the given sampling rate.
class DesignError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined for its input (e.g. zero target variance).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or combination. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. backward without a cached forward pass.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& stage, std::size_t epoch, std::size_t batch)
      : Error(stage + " diverged: non-finite loss at epoch " + std::to_string(epoch) +
              ", batch " + std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

/// Linear solve failed (singular or indefinite system).
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint file is unreadable; `field()` names the offending part.
class CorruptCheckpointError : public Error {
 public:
  CorruptCheckpointError(std::string field, const std::string& detail)
      : Error("corrupt checkpoint (" + field + "): " + detail), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class UnsupportedVersionError : public CorruptCheckpointError {
 public:
  explicit UnsupportedVersionError(unsigned version)
      : CorruptCheckpointError("version",
                               "unsupported checkpoint version " + std::to_string(version)) {}
};

/// Session files fail validation. Carries the 1-based CSV row when known.
class LoadError : public Error {
 public:
  LoadError(const std::string& file, std::size_t row, const std::string& detail)
      : Error(file + (row ? ":" + std::to_string(row) : std::string()) + ": " + detail),
        row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace emgkin
