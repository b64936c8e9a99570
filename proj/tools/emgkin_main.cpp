// emgkin command-line entry point.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <CLI11.hpp>
#include <chrono>
#include <iostream>
#include <optional>

#include "emgkin/error.hpp"
#include "emgkin/io.hpp"
#include "emgkin/parallel.hpp"
#include "emgkin/synth.hpp"

namespace {

using namespace emgkin;

struct ConfigFlags {
  std::string config_path;
  std::string preset;
  std::vector<std::string> sets;  // key=value
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  std::optional<std::string> matrix_mode;
  std::optional<std::string> split;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--preset", preset, "paper or desk, applied before the config file")
        ->check(CLI::IsMember({"paper", "desk"}));
    app->add_option("--set", sets, "override a config key, e.g. --set cnn.epochs=3");
    app->add_option("--seed", seed, "config key seed");
    app->add_option("--k", k, "config key k");
    app->add_option("--matrix-mode", matrix_mode, "config key matrix_mode");
    app->add_option("--split", split, "config key split (intra|inter)");
  }

  TrainingConfig resolve() const {
    TrainingConfig c = preset == "desk" ? TrainingConfig::desk() : TrainingConfig::paper();
    if (!config_path.empty()) c = load_config(config_path, c);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got " + s);
      apply_config_value(c, s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed) c.seed = *seed;
    if (k) c.k = *k;
    if (matrix_mode) c.matrix_mode = parse_matrix_mode(*matrix_mode);
    if (split) c.split = *split;
    c.validate();
    return c;
  }
};

void banner(const std::string& command, const std::string& body) {
  std::cout << "# emgkin " << command << " threads=" << thread_count() << "\n"
            << "# effective config:\n" << body << "\n";
}

struct Partitions {
  SemgRecording train;
  SemgRecording test;
  std::string split;
};

Partitions partitions(const fs::path& data, const std::string& split_mode) {
  const auto dirs = session_dirs(data);
  const SplitMode mode = parse_split_mode(split_mode);
  if (mode == SplitMode::intra) {
    auto [train, test] = split_session(load_session(dirs.front()));
    return {std::move(train), std::move(test), "intra"};
  }
  if (dirs.size() < 2) {
    throw UsageError("inter-session evaluation needs two sessions under " + data.string() +
                     ", found " + std::to_string(dirs.size()));
  }
  SemgRecording a = load_session(dirs[0]);
  SemgRecording b = load_session(dirs[1]);
  if (a.protocol != b.protocol) throw ConfigError("sessions use different protocols");
  SplitPlan plan{SplitMode::inter, 4, a.session_id, b.session_id};
  return {std::move(a), std::move(b), split_label(plan)};
}

void sync_protocol(TrainingConfig& c, Protocol data_protocol) {
  if (c.protocol != data_protocol) {
    std::cout << "# note: protocol taken from data (" << to_string(data_protocol) << ")\n";
    c.protocol = data_protocol;
  }
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  fs::path p = path;
  p.replace_filename(path.stem().string() + suffix);
  return p;
}

int run(int argc, char** argv) {
  CLI::App app{"sEMG to wrist-angle regression with a CNN-LSTM hybrid"};
  app.require_subcommand(1);

  // synth gen
  auto* synth = app.add_subcommand("synth", "synthetic data");
  synth->require_subcommand(1);
  auto* gen = synth->add_subcommand("gen", "generate a synthetic session");
  std::string protocol = "P1";
  double duration = 180.0;
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  bool pair = false;
  double snr_db = 20.0;
  gen->add_option("--protocol", protocol, "P1..P4")->required();
  gen->add_option("--duration", duration, "session length in seconds");
  gen->add_option("--seed", synth_seed, "generator seed");
  gen->add_option("--snr-db", snr_db, "broadband noise level");
  gen->add_option("--out", synth_out, "output directory")->required();
  gen->add_flag("--pair", pair, "write session_a and session_b");

  // train
  auto* train = app.add_subcommand("train", "run both training stages");
  ConfigFlags train_flags;
  train_flags.attach(train);
  std::string train_data, train_out;
  train->add_option("--data", train_data, "session directory or directory of sessions")->required();
  train->add_option("--out", train_out, "checkpoint path")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string model_path, eval_data, report_path, eval_split = "intra", scatter_path;
  bool baselines = false;
  eval->add_option("--model", model_path, "checkpoint")->required();
  eval->add_option("--data", eval_data, "session directory or directory of sessions")->required();
  eval->add_option("--split", eval_split, "intra or inter")->check(CLI::IsMember({"intra", "inter"}));
  eval->add_option("--report", report_path, "report JSON path")->required();
  eval->add_flag("--baselines", baselines, "add cnn-only and krr entries");
  eval->add_option("--scatter", scatter_path, "2-D feature scatter CSV");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "k or matrix-mode sweep");
  ConfigFlags sweep_flags;
  sweep_flags.attach(sweep);
  std::string what, sweep_data, sweep_out;
  sweep->add_option("--what", what, "timesteps or matrixmode")
      ->required()
      ->check(CLI::IsMember({"timesteps", "matrixmode"}));
  sweep->add_option("--data", sweep_data, "session directory or directory of sessions")->required();
  sweep->add_option("--out", sweep_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (gen->parsed()) {
    SynthConfig sc;
    sc.protocol = parse_protocol(protocol);
    sc.duration_s = duration;
    sc.seed = synth_seed;
    sc.snr_db = snr_db;
    sc.validate();
    std::cout << "# emgkin synth gen protocol=" << to_string(sc.protocol) << " duration=" << duration
              << " seed=" << synth_seed << " snr_db=" << snr_db << " pair=" << (pair ? 1 : 0) << "\n";
    if (pair) {
      const auto [a, b] = generate_session_pair(sc);
      save_session(a, fs::path(synth_out) / "session_a");
      save_session(b, fs::path(synth_out) / "session_b");
    } else {
      save_session(generate(sc), synth_out);
    }
    return 0;
  }

  if (train->parsed()) {
    TrainingConfig c = train_flags.resolve();
    auto parts = partitions(train_data, c.split);
    sync_protocol(c, parts.train.protocol);
    banner("train", config_to_json(c));
    const auto start = std::chrono::steady_clock::now();
    HybridTraining t = train_hybrid(c, parts.train);
    save_model(t.model, train_out);
    write_loss_csv(sibling(train_out, "_loss.csv"), t.cnn_loss, t.lstm_loss);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "cnn loss " << t.cnn_loss.front() << " -> " << t.cnn_loss.back() << "\n"
              << "lstm loss " << t.lstm_loss.front() << " -> " << t.lstm_loss.back() << "\n"
              << "wrote " << train_out << " in " << secs << " s\n";
    return 0;
  }

  if (eval->parsed()) {
    HybridModel model = load_model(model_path);
    auto parts = partitions(eval_data, eval_split);
    if (parts.test.protocol != model.protocol) {
      throw ConfigError("model was trained on " + to_string(model.protocol) + ", data is " +
                        to_string(parts.test.protocol));
    }
    std::cout << "# emgkin eval model=" << model_path << " split=" << parts.split
              << " baselines=" << (baselines ? 1 : 0) << " k=" << model.k
              << " matrix_mode=" << to_string(model.prep.mode) << " threads=" << thread_count() << "\n";
    std::vector<EvaluationReport> reports;
    reports.push_back(evaluate_hybrid(model, parts.test, parts.split, model.prep.mode));
    if (baselines) {
      reports.push_back(evaluate_cnn(model, parts.test, parts.split, model.prep.mode));
      const KrrBaseline krr = fit_krr_baseline(model.prep, parts.train);
      reports.push_back(evaluate_krr(krr, model.prep, parts.test, model.k, model.protocol, parts.split));
    }
    write_reports(report_path, reports);
    for (const auto& r : reports) {
      const std::string suffix = r.model == "cnn-lstm" ? "_trajectory.csv" : "_" + r.model + "_trajectory.csv";
      write_trajectory_csv(sibling(report_path, suffix), r);
      std::cout << r.model;
      for (const auto& d : r.dof) std::cout << " r2_" << d.name << "=" << d.r2;
      std::cout << "\n";
    }
    if (!scatter_path.empty()) {
      const auto matrices = model.prep.matrices(parts.test);
      const MatrixDataset ds = stack_matrices(matrices);
      const Tensor64 deep = extract_dataset_features(model.cnn, ds.inputs).cast<double>();
      const Tensor64 hand = handcrafted_rows(model.prep, parts.test);
      write_scatter_csv(scatter_path,
                        {{"deep", project_2d(deep), ds.labels}, {"handcrafted", project_2d(hand), ds.labels}},
                        model.protocol);
    }
    return 0;
  }

  if (sweep->parsed()) {
    TrainingConfig c = sweep_flags.resolve();
    auto parts = partitions(sweep_data, c.split);
    sync_protocol(c, parts.train.protocol);
    banner("sweep " + what, config_to_json(c));
    std::vector<EvaluationReport> reports;
    std::vector<std::string> variants;
    if (what == "timesteps") {
      reports = sweep_timesteps(c, parts.train, parts.test, parts.split);
      for (const auto& r : reports) variants.push_back("k" + std::to_string(r.k));
    } else {
      reports = compare_matrix_modes(c, parts.train, parts.test, parts.split);
      for (const auto& r : reports) variants.push_back(to_string(r.matrix_mode));
    }
    const fs::path out(sweep_out);
    std::string summary = "variant,k,matrix_mode,sequences,r2_mean";
    for (const auto& d : reports.front().dof) summary += ",r2_" + d.name;
    summary += "\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const auto& r = reports[i];
      write_reports(out / (variants[i] + ".json"), {r});
      summary += variants[i] + "," + std::to_string(r.k) + "," + to_string(r.matrix_mode) + "," +
                 std::to_string(r.sequences) + "," + format_double(r.mean_r2());
      for (const auto& d : r.dof) summary += "," + format_double(d.r2);
      summary += "\n";
      std::cout << variants[i] << " r2_mean=" << r.mean_r2() << " sequences=" << r.sequences << "\n";
    }
    atomic_write(out / "summary.csv", summary);
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const emgkin::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const emgkin::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const emgkin::DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
