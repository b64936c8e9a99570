#pragma once

// sEMG preprocessing: IIR filter design and application, min-max scaling,
// sliding-window segmentation and per-window input matrix construction.

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "emgkin/recording.hpp"
#include "emgkin/tensor.hpp"

namespace emgkin {

enum class FilterKind { butter_high, butter_low, notch };

struct FilterSpec {
  FilterKind kind = FilterKind::butter_low;
  int order = 3;
  double cutoff_hz = 0.0;     // center frequency for notch
  double bandwidth_hz = 2.0;  // notch only

  friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

/// Second-order section, a0 normalized to 1:
/// y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(double omega) const;
  /// Largest pole magnitude.
  double pole_radius() const;
};

class FilterCascade {
 public:
  FilterCascade() = default;
  explicit FilterCascade(std::vector<Biquad> sections) : sections_(std::move(sections)) {}

  const std::vector<Biquad>& sections() const noexcept { return sections_; }
  void append(const FilterCascade& other);

  /// Complex frequency response at `hz` for sampling rate `fs`.
  std::complex<double> response(double hz, double fs) const;
  double magnitude(double hz, double fs) const { return std::abs(response(hz, fs)); }
  bool stable() const;

  /// Causal single-pass filtering from zero initial state.
  std::vector<double> apply(std::span<const double> x) const;

 private:
  std::vector<Biquad> sections_;
};

/// Bilinear-transform Butterworth (prewarped so |H(cutoff)| = 1/sqrt(2)) or
/// a second-order notch with the given -3 dB bandwidth.
FilterCascade design_filter(const FilterSpec& spec, double fs);

/// The fixed preprocessing chain: high-pass, then low-pass, then notch.
struct FilterChainConfig {
  FilterSpec highpass{FilterKind::butter_high, 3, 20.0, 0.0};
  FilterSpec lowpass{FilterKind::butter_low, 3, 450.0, 0.0};
  FilterSpec notch{FilterKind::notch, 2, 50.0, 2.0};

  friend bool operator==(const FilterChainConfig&, const FilterChainConfig&) = default;
};

FilterCascade design_chain(const FilterChainConfig& chain, double fs);

/// Filters every EMG channel independently. Angles are left untouched.
SemgRecording apply_filter_chain(const SemgRecording& rec, const FilterChainConfig& chain = {});

/// Per-channel min-max scaling fitted on a training partition.
struct NormalizationStats {
  std::vector<double> min;
  std::vector<double> max;

  friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

NormalizationStats fit_normalizer(const SemgRecording& train);
SemgRecording apply_normalizer(const NormalizationStats& stats, const SemgRecording& rec);

struct RawWindow {
  std::size_t start = 0;  // first EMG sample index
  double end_time = 0.0;  // timestamp of the last sample in the window
  Tensor64 samples;       // [window x N]
  Tensor64 label;         // [D], angle at end_time
};

/// floor((samples - window) / hop) + 1, or 0 when the window does not fit.
std::size_t window_count(std::size_t samples, std::size_t window, std::size_t hop);

std::vector<RawWindow> segment_windows(const SemgRecording& rec, std::size_t window_samples,
                                       std::size_t hop_samples);

enum class MatrixMode { temporal, spectral };

std::string to_string(MatrixMode mode);
MatrixMode parse_matrix_mode(std::string_view text);

struct InputMatrix {
  MatrixMode mode = MatrixMode::spectral;
  Tensor64 values;  // [1 x L x N]
  std::size_t window_start_sample = 0;
  double end_time = 0.0;
  Tensor64 label;  // [D]

  std::size_t length() const { return values.dim(1); }
  std::size_t channels() const { return values.dim(2); }
};

/// Direct real-input DFT with cached twiddle tables.
class RealDft {
 public:
  explicit RealDft(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  /// Full two-sided spectrum of x zero-padded to n.
  std::vector<std::complex<double>> spectrum(std::span<const double> x) const;
  /// Magnitudes of bins 0..n/2 of x zero-padded to n.
  std::vector<double> magnitudes(std::span<const double> x) const;

 private:
  std::size_t n_;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

/// Spectral mode: one-sided magnitude spectrum (n_fft/2 + 1 bins) of each
/// channel zero-padded to n_fft. Temporal mode: the samples themselves.
InputMatrix build_matrix(const RawWindow& window, MatrixMode mode, std::size_t n_fft = 200);

/// Matrix length L produced by build_matrix.
std::size_t matrix_length(MatrixMode mode, std::size_t window_samples, std::size_t n_fft);

/// Window/hop in samples: floor(ms * fs / 1000).
std::size_t ms_to_samples(double ms, double fs);

}  // namespace emgkin
