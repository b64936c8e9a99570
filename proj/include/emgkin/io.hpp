#pragma once

// Session CSVs, binary checkpoints, JSON configs and reports.
//
// Session directory: emg.csv with header t,ch1..chN and angles.csv with header
// t,fe,ps,ru (inactive DoFs are zero columns). An optional meta.json holds
// protocol, session_id, fs_emg and fs_ang.
//
// Checkpoint: "EMGK", u32 version, u32 model kind, u32 descriptor length,
// JSON descriptor, u64 value count, little-endian f32 values in declared order.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "emgkin/evaluation.hpp"

namespace emgkin {

namespace fs = std::filesystem;

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes `bytes` to a sibling temp file and renames it over `path`.
void atomic_write(const fs::path& path, std::string_view bytes);

void save_session(const SemgRecording& rec, const fs::path& dir);
SemgRecording load_session(const fs::path& dir, std::size_t expected_channels = 6);

/// A session directory itself, or every subdirectory holding emg.csv, in name order.
std::vector<fs::path> session_dirs(const fs::path& data);

void save_model(HybridModel& model, const fs::path& path);
HybridModel load_model(const fs::path& path);

/// Applies one setting. Keys use dots for nesting (e.g. "cnn.epochs").
void apply_config_value(TrainingConfig& config, std::string_view key, const std::string& json_value);
/// Reads a JSON config file on top of `base`. Keys may be nested objects or
/// dotted names. A "preset" key (paper | desk) replaces `base` before the
/// other keys are applied.
TrainingConfig load_config(const fs::path& path, TrainingConfig base = TrainingConfig::paper());
/// Every resolved setting as a JSON object (the effective-config banner).
std::string config_to_json(const TrainingConfig& config);

std::string reports_to_json(const std::vector<EvaluationReport>& reports);
std::vector<EvaluationReport> reports_from_json(std::string_view text);
void write_reports(const fs::path& path, const std::vector<EvaluationReport>& reports);
std::vector<EvaluationReport> read_reports(const fs::path& path);

/// Long format: t,true,pred,dof.
void write_trajectory_csv(const fs::path& path, const EvaluationReport& report);
/// epoch,stage,loss
void write_loss_csv(const fs::path& path, const std::vector<double>& cnn_loss,
                    const std::vector<double>& lstm_loss);

struct ScatterSet {
  std::string feature_kind;  // "deep" or "handcrafted"
  Tensor64 points;           // [M x 2]
  Tensor64 angles;           // [M x D]
};

/// x,y,angle,dof,feature_kind
void write_scatter_csv(const fs::path& path, const std::vector<ScatterSet>& sets, Protocol protocol);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace emgkin
