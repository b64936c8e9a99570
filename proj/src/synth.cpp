#include "emgkin/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "emgkin/dsp.hpp"
#include "emgkin/error.hpp"

namespace emgkin {
namespace {

// Rows: channels; columns: fe, ps, ru.
constexpr int kPolarity[6][kAllDofs] = {
    {+1, +1, +1}, {+1, -1, -1}, {+1, +1, -1}, {-1, -1, +1}, {-1, +1, +1}, {-1, -1, -1},
};

constexpr double kGain[6][kAllDofs] = {
    {1.00, 0.45, 0.60}, {0.90, 0.35, 0.80}, {0.80, 0.40, 0.70},
    {1.00, 0.30, 0.90}, {0.90, 0.50, 0.65}, {0.80, 0.40, 0.75},
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

void SynthConfig::validate() const {
  if (!(contraction_hz > 0.0 && contraction_hz < 1.0)) {
    throw ConfigError("contraction frequency must be in (0, 1) Hz");
  }
  if (!(duration_s > 0.0)) throw ConfigError("duration must be positive");
  if (channels != 6) throw ConfigError("the generator models exactly 6 channels");
  if (!(fs_emg > 900.0)) throw ConfigError("EMG sampling rate must exceed 900 Hz");
  if (!(fs_ang > 0.0)) throw ConfigError("angle sampling rate must be positive");
  const std::size_t d = active_dofs(protocol).size();
  if (!gain.empty()) {
    if (gain.rank() != 2 || gain.dim(0) != channels || gain.dim(1) != d) {
      throw ConfigError("gain matrix " + shape_string(gain.shape()) + " does not match " +
                        std::to_string(channels) + " channels x " + std::to_string(d) +
                        " DoFs of protocol " + to_string(protocol));
    }
    for (double g : gain.data()) {
      if (!(g >= 0.0)) throw ConfigError("gain entries must be >= 0");
    }
  }
  if (crosstalk < 0.0 || crosstalk >= 1.0) throw ConfigError("crosstalk must be in [0, 1)");
  for (double a : amplitude_deg) {
    if (!(a > 0.0)) throw ConfigError("amplitudes must be positive");
  }
}

int channel_polarity(std::size_t channel, Dof dof) {
  return kPolarity[channel % 6][static_cast<std::size_t>(dof)];
}

Tensor64 default_gain(Protocol protocol) {
  const auto dofs = active_dofs(protocol);
  Tensor64 g({6, dofs.size()});
  for (std::size_t n = 0; n < 6; ++n) {
    for (std::size_t j = 0; j < dofs.size(); ++j) {
      // Single-DoF protocols use the strong F-E profile for whichever DoF moves.
      g(n, j) = protocol == Protocol::P4 ? kGain[n][static_cast<std::size_t>(dofs[j])] : kGain[n][0];
    }
  }
  return g;
}

std::vector<double> synth_angles(const SynthConfig& config, double t) {
  const auto dofs = active_dofs(config.protocol);
  std::vector<double> out(dofs.size());
  for (std::size_t j = 0; j < dofs.size(); ++j) {
    const double phase =
        config.protocol == Protocol::P4 ? 2.0 * std::numbers::pi * static_cast<double>(j) / 3.0 : 0.0;
    const double amp = config.amplitude_deg[static_cast<std::size_t>(dofs[j])];
    out[j] = amp * std::sin(2.0 * std::numbers::pi * config.contraction_hz * t + phase);
  }
  return out;
}

std::vector<double> channel_drive(const SynthConfig& config, const Tensor64& gain, double t) {
  const auto dofs = active_dofs(config.protocol);
  const auto theta = synth_angles(config, t);
  std::vector<double> drive(config.channels, 0.0);
  for (std::size_t j = 0; j < dofs.size(); ++j) {
    const double unit = theta[j] / config.amplitude_deg[static_cast<std::size_t>(dofs[j])];
    for (std::size_t n = 0; n < config.channels; ++n) {
      const double signed_unit = channel_polarity(n, dofs[j]) * unit;
      const double agonist = std::max(signed_unit, 0.0);
      const double antagonist = std::max(-signed_unit, 0.0);
      drive[n] += gain(n, j) * (agonist + config.crosstalk * antagonist);
    }
  }
  return drive;
}

SemgRecording generate(const SynthConfig& config) {
  config.validate();
  const Tensor64 gain = config.gain.empty() ? default_gain(config.protocol) : config.gain;
  const auto dofs = active_dofs(config.protocol);
  const auto t_emg = static_cast<std::size_t>(std::floor(config.duration_s * config.fs_emg));
  const auto t_ang = static_cast<std::size_t>(std::floor(config.duration_s * config.fs_ang));
  if (t_emg < 2 || t_ang < 2) throw ConfigError("duration too short");

  SemgRecording rec;
  rec.fs_emg = config.fs_emg;
  rec.fs_ang = config.fs_ang;
  rec.protocol = config.protocol;
  rec.session_id = config.session_id;
  rec.angles = Tensor64({t_ang, dofs.size()});
  for (std::size_t i = 0; i < t_ang; ++i) {
    const auto theta = synth_angles(config, rec.angle_time(i));
    for (std::size_t j = 0; j < dofs.size(); ++j) rec.angles(i, j) = theta[j];
  }

  // Carrier: white noise band-limited to 20-450 Hz, one second of run-in
  // discarded so the filter transient never reaches the output.
  FilterCascade band = design_filter({FilterKind::butter_high, 4, 20.0, 0.0}, config.fs_emg);
  band.append(design_filter({FilterKind::butter_low, 4, 450.0, 0.0}, config.fs_emg));
  const auto run_in = static_cast<std::size_t>(config.fs_emg);

  std::mt19937_64 rng(mix_seed(config.seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);

  std::vector<std::vector<double>> drive(t_emg);
  for (std::size_t i = 0; i < t_emg; ++i) drive[i] = channel_drive(config, gain, rec.emg_time(i));

  rec.emg = Tensor64({t_emg, config.channels});
  std::vector<double> white(t_emg + run_in);
  for (std::size_t n = 0; n < config.channels; ++n) {
    for (auto& v : white) v = normal(rng);
    const auto carrier_full = band.apply(white);
    double carrier_sq = 0.0;
    for (std::size_t i = run_in; i < carrier_full.size(); ++i) carrier_sq += carrier_full[i] * carrier_full[i];
    const double carrier_rms = std::sqrt(carrier_sq / static_cast<double>(t_emg));

    std::vector<double> signal(t_emg);
    double signal_sq = 0.0;
    for (std::size_t i = 0; i < t_emg; ++i) {
      signal[i] = drive[i][n] * carrier_full[i + run_in] / carrier_rms;
      signal_sq += signal[i] * signal[i];
    }
    const double signal_rms = std::sqrt(signal_sq / static_cast<double>(t_emg));
    const double noise_sd = signal_rms * std::pow(10.0, -config.snr_db / 20.0);
    const double mains_amp = std::sqrt(2.0) * signal_rms * std::pow(10.0, config.mains_db / 20.0);
    const double mains_phase = phase_dist(rng);
    for (std::size_t i = 0; i < t_emg; ++i) {
      const double t = rec.emg_time(i);
      rec.emg(i, n) = signal[i] + noise_sd * normal(rng) +
                      mains_amp * std::sin(2.0 * std::numbers::pi * 50.0 * t + mains_phase);
    }
  }
  return rec;
}

std::pair<SemgRecording, SemgRecording> generate_session_pair(const SynthConfig& config) {
  config.validate();
  SynthConfig a = config;
  if (a.session_id.empty()) a.session_id = "A";
  SynthConfig b = config;
  b.session_id = a.session_id == "B" ? "C" : "B";
  b.seed = mix_seed(config.seed, 1);
  Tensor64 gain = config.gain.empty() ? default_gain(config.protocol) : config.gain;
  std::mt19937_64 rng(mix_seed(config.seed, 2));
  std::uniform_real_distribution<double> jitter(-0.2, 0.2);
  for (auto& g : gain.data()) g *= 1.0 + jitter(rng);
  b.gain = gain;
  return {generate(a), generate(b)};
}

}  // namespace emgkin
