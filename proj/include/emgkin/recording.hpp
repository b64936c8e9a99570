#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "emgkin/tensor.hpp"

namespace emgkin {

/// Wrist movement protocols. P1-P3 move a single DoF; P4 moves all three.
enum class Protocol { P1, P2, P3, P4 };

/// Wrist degrees of freedom in CSV column order.
enum class Dof { flexion_extension = 0, pronation_supination = 1, radial_ulnar = 2 };

inline constexpr std::size_t kAllDofs = 3;

std::string to_string(Protocol p);
Protocol parse_protocol(std::string_view text);  // throws ConfigError
std::string dof_name(Dof d);                     // "fe", "ps", "ru"

/// DoFs driven by a protocol, in column order.
std::vector<Dof> active_dofs(Protocol p);

/// One session of multi-channel sEMG with synchronized wrist angles.
///
/// Samples are uniformly spaced: sample i of the EMG stream is at
/// `emg_t0 + i / fs_emg`, and likewise for the angle stream. `angles` holds
/// only the active DoFs of `protocol`.
struct SemgRecording {
  Tensor64 emg;     // [T_e x N]
  Tensor64 angles;  // [T_a x D], degrees
  double fs_emg = 1024.0;
  double fs_ang = 100.0;
  double emg_t0 = 0.0;
  double ang_t0 = 0.0;
  Protocol protocol = Protocol::P1;
  std::string session_id;

  std::size_t emg_samples() const { return emg.empty() ? 0 : emg.dim(0); }
  std::size_t angle_samples() const { return angles.empty() ? 0 : angles.dim(0); }
  std::size_t channels() const { return emg.empty() ? 0 : emg.dim(1); }
  std::size_t dof_count() const { return angles.empty() ? 0 : angles.dim(1); }
  double emg_time(std::size_t i) const { return emg_t0 + static_cast<double>(i) / fs_emg; }
  double angle_time(std::size_t i) const { return ang_t0 + static_cast<double>(i) / fs_ang; }

  /// Angle at time t by linear interpolation, clamped at the ends.
  std::vector<double> angle_at(double t) const;

  /// Sub-recording of EMG samples [begin, end) plus the angle samples whose
  /// timestamps fall inside the same time span.
  SemgRecording slice_samples(std::size_t begin, std::size_t end) const;
};

/// Throws DataError when the recording violates its invariants.
void validate(const SemgRecording& rec, double lowpass_cutoff_hz = 450.0);

}  // namespace emgkin
