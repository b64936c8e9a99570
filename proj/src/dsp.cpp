#include "emgkin/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "emgkin/error.hpp"

namespace emgkin {

// ---------------------------------------------------------------------------
// recording

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::P1: return "P1";
    case Protocol::P2: return "P2";
    case Protocol::P3: return "P3";
    case Protocol::P4: return "P4";
  }
  return "?";
}

Protocol parse_protocol(std::string_view text) {
  if (text == "P1" || text == "p1") return Protocol::P1;
  if (text == "P2" || text == "p2") return Protocol::P2;
  if (text == "P3" || text == "p3") return Protocol::P3;
  if (text == "P4" || text == "p4") return Protocol::P4;
  throw ConfigError("unknown protocol '" + std::string(text) + "' (expected P1..P4)");
}

std::string dof_name(Dof d) {
  switch (d) {
    case Dof::flexion_extension: return "fe";
    case Dof::pronation_supination: return "ps";
    case Dof::radial_ulnar: return "ru";
  }
  return "?";
}

std::vector<Dof> active_dofs(Protocol p) {
  switch (p) {
    case Protocol::P1: return {Dof::flexion_extension};
    case Protocol::P2: return {Dof::pronation_supination};
    case Protocol::P3: return {Dof::radial_ulnar};
    case Protocol::P4:
      return {Dof::flexion_extension, Dof::pronation_supination, Dof::radial_ulnar};
  }
  return {};
}

std::vector<double> SemgRecording::angle_at(double t) const {
  const std::size_t n = angle_samples();
  if (n == 0) throw DataError("recording has no angle samples");
  const std::size_t d = dof_count();
  std::vector<double> out(d);
  const double u = std::clamp((t - ang_t0) * fs_ang, 0.0, static_cast<double>(n - 1));
  const auto i = static_cast<std::size_t>(std::floor(u));
  const double frac = u - static_cast<double>(i);
  const std::size_t j = std::min(i + 1, n - 1);
  for (std::size_t c = 0; c < d; ++c) {
    out[c] = angles(i, c) + frac * (angles(j, c) - angles(i, c));
  }
  return out;
}

SemgRecording SemgRecording::slice_samples(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > emg_samples()) {
    throw InsufficientDataError("invalid sample range [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ")");
  }
  SemgRecording out;
  out.fs_emg = fs_emg;
  out.fs_ang = fs_ang;
  out.protocol = protocol;
  out.session_id = session_id;
  out.emg = slice(emg, 0, begin, end);
  out.emg_t0 = emg_time(begin);
  const double t_begin = emg_time(begin);
  const double t_end = emg_time(end);
  constexpr double eps = 1e-9;
  const auto first_at_or_after = [&](double t) {
    const double u = std::ceil((t - ang_t0) * fs_ang - eps);
    return static_cast<std::size_t>(std::clamp(u, 0.0, static_cast<double>(angle_samples())));
  };
  const std::size_t a_begin = first_at_or_after(t_begin);
  const std::size_t a_end = first_at_or_after(t_end);
  if (a_begin >= a_end) {
    throw InsufficientDataError("no angle samples inside the requested time span");
  }
  out.angles = slice(angles, 0, a_begin, a_end);
  out.ang_t0 = angle_time(a_begin);
  return out;
}

void validate(const SemgRecording& rec, double lowpass_cutoff_hz) {
  if (rec.emg.rank() != 2 || rec.emg_samples() == 0) throw DataError("recording has no EMG samples");
  if (rec.angles.rank() != 2 || rec.angle_samples() == 0) {
    throw DataError("recording has no angle samples");
  }
  if (!(rec.fs_emg > 0.0) || !(rec.fs_ang > 0.0)) throw DataError("sampling rates must be positive");
  if (!(rec.fs_emg > 2.0 * lowpass_cutoff_hz)) {
    throw DataError("EMG sampling rate " + std::to_string(rec.fs_emg) +
                    " Hz is below twice the low-pass cutoff");
  }
  const std::size_t expected = active_dofs(rec.protocol).size();
  if (rec.dof_count() != expected) {
    throw DataError("protocol " + to_string(rec.protocol) + " needs " + std::to_string(expected) +
                    " angle columns, recording has " + std::to_string(rec.dof_count()));
  }
  if (!rec.emg.all_finite()) throw DataError("EMG contains non-finite values");
  if (!rec.angles.all_finite()) throw DataError("angles contain non-finite values");
}

// ---------------------------------------------------------------------------
// filters

std::complex<double> Biquad::response(double omega) const {
  const std::complex<double> z1 = std::polar(1.0, -omega);
  const std::complex<double> z2 = z1 * z1;
  return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
}

double Biquad::pole_radius() const {
  const double disc = a1 * a1 - 4.0 * a2;
  if (disc < 0.0) return std::sqrt(a2);
  const double s = std::sqrt(disc);
  return std::max(std::abs((-a1 + s) / 2.0), std::abs((-a1 - s) / 2.0));
}

void FilterCascade::append(const FilterCascade& other) {
  sections_.insert(sections_.end(), other.sections_.begin(), other.sections_.end());
}

std::complex<double> FilterCascade::response(double hz, double fs) const {
  const double omega = 2.0 * std::numbers::pi * hz / fs;
  std::complex<double> h = 1.0;
  for (const auto& s : sections_) h *= s.response(omega);
  return h;
}

bool FilterCascade::stable() const {
  return std::all_of(sections_.begin(), sections_.end(),
                     [](const Biquad& s) { return s.pole_radius() < 1.0; });
}

std::vector<double> FilterCascade::apply(std::span<const double> x) const {
  std::vector<double> y(x.begin(), x.end());
  for (const auto& s : sections_) {
    double s1 = 0.0, s2 = 0.0;
    for (auto& v : y) {
      const double in = v;
      const double out = s.b0 * in + s1;
      s1 = s.b1 * in - s.a1 * out + s2;
      s2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

namespace {

FilterCascade design_butterworth(bool highpass, int order, double cutoff, double fs) {
  const double k = std::tan(std::numbers::pi * cutoff / fs);
  const double k2 = k * k;
  std::vector<Biquad> sections;
  for (int i = 0; i < order / 2; ++i) {
    // Analog prototype pole pair at angle theta; q = 1/Q of the section.
    const double theta = std::numbers::pi * (2.0 * i + order + 1.0) / (2.0 * order);
    const double q = -2.0 * std::cos(theta);
    const double norm = 1.0 / (1.0 + q * k + k2);
    Biquad s;
    if (highpass) {
      s.b0 = norm;
      s.b1 = -2.0 * norm;
      s.b2 = norm;
    } else {
      s.b0 = k2 * norm;
      s.b1 = 2.0 * k2 * norm;
      s.b2 = k2 * norm;
    }
    s.a1 = 2.0 * (k2 - 1.0) * norm;
    s.a2 = (1.0 - q * k + k2) * norm;
    sections.push_back(s);
  }
  if (order % 2 == 1) {
    const double norm = 1.0 / (1.0 + k);
    Biquad s;
    if (highpass) {
      s.b0 = norm;
      s.b1 = -norm;
    } else {
      s.b0 = k * norm;
      s.b1 = k * norm;
    }
    s.a1 = (k - 1.0) * norm;
    sections.push_back(s);
  }
  return FilterCascade(std::move(sections));
}

}  // namespace

FilterCascade design_filter(const FilterSpec& spec, double fs) {
  if (!(fs > 0.0)) throw DesignError("sampling rate must be positive");
  if (!(spec.cutoff_hz > 0.0) || !(spec.cutoff_hz < fs / 2.0)) {
    throw DesignError("cutoff " + std::to_string(spec.cutoff_hz) + " Hz outside (0, " +
                      std::to_string(fs / 2.0) + ") Hz");
  }
  switch (spec.kind) {
    case FilterKind::butter_high:
    case FilterKind::butter_low:
      if (spec.order < 1) throw DesignError("filter order must be >= 1");
      return design_butterworth(spec.kind == FilterKind::butter_high, spec.order, spec.cutoff_hz,
                                fs);
    case FilterKind::notch: {
      if (!(spec.bandwidth_hz > 0.0)) throw DesignError("notch bandwidth must be positive");
      const double w0 = 2.0 * std::numbers::pi * spec.cutoff_hz / fs;
      const double q = spec.cutoff_hz / spec.bandwidth_hz;
      const double alpha = std::sin(w0) / (2.0 * q);
      const double a0 = 1.0 + alpha;
      Biquad s;
      s.b0 = 1.0 / a0;
      s.b1 = -2.0 * std::cos(w0) / a0;
      s.b2 = 1.0 / a0;
      s.a1 = -2.0 * std::cos(w0) / a0;
      s.a2 = (1.0 - alpha) / a0;
      return FilterCascade({s});
    }
  }
  throw DesignError("unknown filter kind");
}

FilterCascade design_chain(const FilterChainConfig& chain, double fs) {
  FilterCascade out = design_filter(chain.highpass, fs);
  out.append(design_filter(chain.lowpass, fs));
  out.append(design_filter(chain.notch, fs));
  return out;
}

SemgRecording apply_filter_chain(const SemgRecording& rec, const FilterChainConfig& chain) {
  if (!rec.emg.all_finite()) throw DataError("EMG contains non-finite values");
  const FilterCascade cascade = design_chain(chain, rec.fs_emg);
  SemgRecording out = rec;
  const std::size_t t = rec.emg_samples();
  const std::size_t n = rec.channels();
  std::vector<double> column(t);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = 0; i < t; ++i) column[i] = rec.emg(i, c);
    const auto filtered = cascade.apply(column);
    for (std::size_t i = 0; i < t; ++i) out.emg(i, c) = filtered[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// normalization

NormalizationStats fit_normalizer(const SemgRecording& train) {
  const std::size_t t = train.emg_samples();
  const std::size_t n = train.channels();
  if (t == 0) throw InsufficientDataError("cannot fit normalizer on an empty recording");
  NormalizationStats stats;
  stats.min.assign(n, std::numeric_limits<double>::infinity());
  stats.max.assign(n, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t c = 0; c < n; ++c) {
      stats.min[c] = std::min(stats.min[c], train.emg(i, c));
      stats.max[c] = std::max(stats.max[c], train.emg(i, c));
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (!(stats.max[c] > stats.min[c])) {
      throw DataError("degenerate channel " + std::to_string(c + 1) + ": max == min");
    }
  }
  return stats;
}

SemgRecording apply_normalizer(const NormalizationStats& stats, const SemgRecording& rec) {
  const std::size_t n = rec.channels();
  if (stats.min.size() != n || stats.max.size() != n) {
    throw DimensionError("normalizer fitted on " + std::to_string(stats.min.size()) +
                         " channels, recording has " + std::to_string(n));
  }
  SemgRecording out = rec;
  for (std::size_t i = 0; i < rec.emg_samples(); ++i) {
    for (std::size_t c = 0; c < n; ++c) {
      out.emg(i, c) = (rec.emg(i, c) - stats.min[c]) / (stats.max[c] - stats.min[c]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// segmentation and matrices

std::size_t window_count(std::size_t samples, std::size_t window, std::size_t hop) {
  if (window == 0 || hop == 0 || samples < window) return 0;
  return (samples - window) / hop + 1;
}

std::vector<RawWindow> segment_windows(const SemgRecording& rec, std::size_t window_samples,
                                       std::size_t hop_samples) {
  if (window_samples == 0 || hop_samples == 0) {
    throw ConfigError("window and hop must be positive");
  }
  const std::size_t t = rec.emg_samples();
  if (window_samples > t) {
    throw InsufficientDataError("window of " + std::to_string(window_samples) +
                                " samples exceeds recording length " + std::to_string(t));
  }
  const std::size_t count = window_count(t, window_samples, hop_samples);
  const std::size_t d = rec.dof_count();
  std::vector<RawWindow> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    RawWindow win;
    win.start = w * hop_samples;
    win.end_time = rec.emg_time(win.start + window_samples - 1);
    win.samples = slice(rec.emg, 0, win.start, win.start + window_samples);
    const auto label = rec.angle_at(win.end_time);
    win.label = Tensor64({d}, label);
    out.push_back(std::move(win));
  }
  return out;
}

std::string to_string(MatrixMode mode) {
  return mode == MatrixMode::spectral ? "spectral" : "temporal";
}

MatrixMode parse_matrix_mode(std::string_view text) {
  if (text == "spectral") return MatrixMode::spectral;
  if (text == "temporal") return MatrixMode::temporal;
  throw ConfigError("unknown matrix mode '" + std::string(text) + "' (expected spectral|temporal)");
}

RealDft::RealDft(std::size_t n) : n_(n), cos_(n), sin_(n) {
  if (n == 0) throw DimensionError("DFT length must be positive");
  for (std::size_t k = 0; k < n; ++k) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    cos_[k] = std::cos(phase);
    sin_[k] = std::sin(phase);
  }
}

std::vector<std::complex<double>> RealDft::spectrum(std::span<const double> x) const {
  if (x.size() > n_) throw DimensionError("DFT input longer than transform length");
  std::vector<std::complex<double>> out(n_);
  for (std::size_t m = 0; m < n_; ++m) {
    double re = 0.0, im = 0.0;
    std::size_t idx = 0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      re += x[t] * cos_[idx];
      im -= x[t] * sin_[idx];
      idx += m;
      if (idx >= n_) idx -= n_;
    }
    out[m] = {re, im};
  }
  return out;
}

std::vector<double> RealDft::magnitudes(std::span<const double> x) const {
  if (x.size() > n_) throw DimensionError("DFT input longer than transform length");
  const std::size_t bins = n_ / 2 + 1;
  std::vector<double> out(bins);
  for (std::size_t m = 0; m < bins; ++m) {
    double re = 0.0, im = 0.0;
    std::size_t idx = 0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      re += x[t] * cos_[idx];
      im -= x[t] * sin_[idx];
      idx += m;
      if (idx >= n_) idx -= n_;
    }
    out[m] = std::hypot(re, im);
  }
  return out;
}

std::size_t matrix_length(MatrixMode mode, std::size_t window_samples, std::size_t n_fft) {
  return mode == MatrixMode::spectral ? n_fft / 2 + 1 : window_samples;
}

InputMatrix build_matrix(const RawWindow& window, MatrixMode mode, std::size_t n_fft) {
  if (window.samples.rank() != 2) throw DimensionError("window must be [samples x channels]");
  const std::size_t w = window.samples.dim(0);
  const std::size_t n = window.samples.dim(1);
  InputMatrix out;
  out.mode = mode;
  out.window_start_sample = window.start;
  out.end_time = window.end_time;
  out.label = window.label;
  if (mode == MatrixMode::temporal) {
    out.values = window.samples.reshape({1, w, n});
    return out;
  }
  if (w > n_fft) {
    throw DimensionError("window of " + std::to_string(w) + " samples exceeds n_fft " +
                         std::to_string(n_fft));
  }
  // One plan per thread; n_fft rarely changes within a run.
  thread_local std::unique_ptr<RealDft> plan;
  if (!plan || plan->size() != n_fft) plan = std::make_unique<RealDft>(n_fft);
  const std::size_t bins = n_fft / 2 + 1;
  out.values = Tensor64({1, bins, n});
  std::vector<double> column(w);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = 0; i < w; ++i) column[i] = window.samples(i, c);
    const auto mags = plan->magnitudes(column);
    for (std::size_t b = 0; b < bins; ++b) out.values(0, b, c) = mags[b];
  }
  return out;
}

std::size_t ms_to_samples(double ms, double fs) {
  return static_cast<std::size_t>(std::floor(ms * fs / 1000.0 + 1e-9));
}

}  // namespace emgkin
