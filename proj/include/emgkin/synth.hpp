#pragma once

// Seeded generator of sEMG sessions with known wrist angles.
//
// Each active DoF follows a sinusoid. Every EMG channel is band-limited
// (20-450 Hz) Gaussian noise whose amplitude follows a rectified activation
// envelope: a channel responds to the positive or the negative half-wave of
// each DoF according to a fixed polarity table, scaled by a gain matrix, with
// a small leak from the opposite half-wave (co-contraction crosstalk).
// Broadband sensor noise and a 50 Hz mains component are added on top.

#include <array>
#include <cstdint>
#include <string>
#include <utility>

#include "emgkin/recording.hpp"

namespace emgkin {

struct SynthConfig {
  Protocol protocol = Protocol::P1;
  double duration_s = 180.0;
  double contraction_hz = 0.1;
  std::array<double, kAllDofs> amplitude_deg{60.0, 60.0, 30.0};  // fe, ps, ru
  Tensor64 gain;           // [channels x D]; empty selects default_gain(protocol)
  double crosstalk = 0.15;  // leak of the opposite half-wave, fraction of gain
  double snr_db = 20.0;
  double mains_db = -20.0;  // 50 Hz component relative to signal RMS
  std::uint64_t seed = 1;
  std::string session_id = "A";
  double fs_emg = 1024.0;
  double fs_ang = 100.0;
  std::size_t channels = 6;

  void validate() const;
};

/// +1: channel driven by the positive half-wave of `dof`; -1: the negative.
int channel_polarity(std::size_t channel, Dof dof);

/// Default channel sensitivities, [6 x D]. In P4 the P-S column is weakest.
Tensor64 default_gain(Protocol protocol);

/// Drive amplitude of every channel at time t, [channels].
std::vector<double> channel_drive(const SynthConfig& config, const Tensor64& gain, double t);

/// Angle of each active DoF at time t (degrees).
std::vector<double> synth_angles(const SynthConfig& config, double t);

SemgRecording generate(const SynthConfig& config);

/// Second session with a fresh seed and the gain matrix jittered by up to
/// +-20% per entry, emulating electrode shift between sessions.
std::pair<SemgRecording, SemgRecording> generate_session_pair(const SynthConfig& config);

}  // namespace emgkin
