#include <doctest.h>

#include <fstream>
#include <sstream>
#include <unistd.h>

#include "emgkin/io.hpp"
#include "fixtures.hpp"

using namespace emgkin;
using test::quick_config;
using test::short_session;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("emgkin_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string join(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  return s;
}

HybridModel& trained_model() {
  static HybridTraining t = train_hybrid(quick_config(1, 1), short_session(Protocol::P4, 6.0));
  return t.model;
}

}  // namespace

TEST_CASE("sessions round-trip exactly") {
  TempDir dir;
  for (Protocol p : {Protocol::P2, Protocol::P4}) {
    auto rec = short_session(p, 2.0);
    rec.session_id = "S7";
    save_session(rec, dir.path / to_string(p));
    const auto back = load_session(dir.path / to_string(p));
    CHECK(back.emg == rec.emg);
    CHECK(back.angles == rec.angles);
    CHECK(back.protocol == p);
    CHECK(back.session_id == "S7");
    CHECK(back.fs_emg == rec.fs_emg);
  }
  const auto dirs = session_dirs(dir.path);
  REQUIRE(dirs.size() == 2);
  CHECK(dirs[0].filename() == "P2");
  CHECK(session_dirs(dirs[1]).size() == 1);
  CHECK_THROWS_AS(session_dirs(dir.path / "missing"), ConfigError);
}

TEST_CASE("the protocol is inferred without meta.json") {
  TempDir dir;
  save_session(short_session(Protocol::P3, 2.0), dir.path);
  fs::remove(dir.path / "meta.json");
  CHECK(load_session(dir.path).protocol == Protocol::P3);
}

TEST_CASE("malformed sessions are rejected") {
  TempDir dir;
  save_session(short_session(Protocol::P1, 2.0), dir.path);
  const auto emg_path = dir.path / "emg.csv";
  const auto original = lines_of(slurp(emg_path));

  SUBCASE("rows out of order") {
    auto l = original;
    std::swap(l[10], l[11]);
    spit(emg_path, join(l));
    try {
      load_session(dir.path);
      FAIL("expected a load error");
    } catch (const LoadError& e) {
      CHECK(e.row() == 12);
    }
  }
  SUBCASE("non-finite cell") {
    auto l = original;
    l[5] = l[5].substr(0, l[5].rfind(',')) + ",nan";
    spit(emg_path, join(l));
    try {
      load_session(dir.path);
      FAIL("expected a load error");
    } catch (const LoadError& e) {
      CHECK(e.row() == 6);
    }
  }
  SUBCASE("wrong channel count") {
    auto l = original;
    for (auto& row : l) row = row.substr(0, row.rfind(','));
    spit(emg_path, join(l));
    CHECK_THROWS_AS(load_session(dir.path), LoadError);
    CHECK_NOTHROW(load_session(dir.path, 5));
  }
  SUBCASE("wrong sampling rate") {
    auto meta = slurp(dir.path / "meta.json");
    const auto pos = meta.find("1024");
    REQUIRE(pos != std::string::npos);
    meta.replace(pos, 4, "2048");
    spit(dir.path / "meta.json", meta);
    CHECK_THROWS_AS(load_session(dir.path), LoadError);
  }
}

TEST_CASE("checkpoints reproduce predictions bit for bit") {
  TempDir dir;
  auto& model = trained_model();
  const auto test = short_session(Protocol::P4, 4.0, 9);
  save_model(model, dir.path / "m.bin");
  auto loaded = load_model(dir.path / "m.bin");
  CHECK(loaded.k == model.k);
  CHECK(loaded.protocol == model.protocol);
  CHECK(loaded.prep == model.prep);
  CHECK(loaded.scaler == model.scaler);
  CHECK(parameter_checksum(loaded.cnn) == parameter_checksum(model.cnn));
  CHECK(predict(loaded, test).pred == predict(model, test).pred);
  CHECK(predict_cnn(loaded, test).pred == predict_cnn(model, test).pred);

  // Saving the loaded model gives the same bytes.
  save_model(loaded, dir.path / "again.bin");
  CHECK(slurp(dir.path / "m.bin") == slurp(dir.path / "again.bin"));
}

TEST_CASE("corrupt checkpoints name the broken field") {
  TempDir dir;
  const auto path = dir.path / "m.bin";
  save_model(trained_model(), path);
  const std::string good = slurp(path);
  const auto field_of = [&](const std::string& bytes) -> std::string {
    spit(path, bytes);
    try {
      load_model(path);
    } catch (const CorruptCheckpointError& e) {
      return e.field();
    }
    return "";
  };

  std::string bad = good;
  bad[0] = 'X';
  CHECK(field_of(bad) == "magic");

  bad = good;
  bad[4] = static_cast<char>(kCheckpointVersion + 1);
  spit(path, bad);
  CHECK_THROWS_AS(load_model(path), UnsupportedVersionError);
  CHECK(field_of(bad) == "version");

  CHECK(field_of(good.substr(0, good.size() - 7)) == "blob");
  CHECK(field_of(good + "x") == "blob");
  CHECK(field_of(good.substr(0, 14)) == "descriptor");

  bad = good;
  const auto pos = bad.find("conv1.conv.weight");
  REQUIRE(pos != std::string::npos);
  bad[pos + 4] = '9';
  CHECK(field_of(bad) == "tensors[0].name");

  bad = good;
  const auto brace = bad.find('{');
  bad[brace] = '[';
  CHECK(field_of(bad) == "descriptor");

  CHECK(field_of(good).empty());
}

TEST_CASE("config files accept nested and dotted keys") {
  TempDir dir;
  const auto path = dir.path / "c.json";
  spit(path, R"({"preset": "desk", "cnn": {"epochs": 3, "optimizer": "adam"},
                 "lstm.batch": 32, "k": 8, "filters": {"notch_hz": 60}})");
  const auto c = load_config(path);
  CHECK(c.cnn.epochs == 3);
  CHECK(c.cnn.kind == OptimizerKind::adam);
  CHECK(c.lstm.batch_size == 32);
  CHECK(c.lstm.epochs == TrainingConfig::desk().lstm.epochs);
  CHECK(c.k == 8);
  CHECK(c.filters.notch.cutoff_hz == 60.0);

  spit(path, R"({"cnn": {"epoch": 3}})");
  CHECK_THROWS_AS(load_config(path), ConfigError);
  spit(path, R"({"k": "many"})");
  CHECK_THROWS_AS(load_config(path), ConfigError);
  spit(path, R"({"k": 0})");
  CHECK_THROWS_AS(load_config(path), ConfigError);
  CHECK_THROWS_AS(load_config(dir.path / "none.json"), ConfigError);

  TrainingConfig d;
  apply_config_value(d, "matrix_mode", "temporal");
  CHECK(d.matrix_mode == MatrixMode::temporal);
  apply_config_value(d, "lstm.lr0", "0.01");
  CHECK(d.lstm.lr0 == 0.01);

  // The printed config parses back to the same settings.
  spit(path, config_to_json(c));
  CHECK(load_config(path) == c);
}

TEST_CASE("atomic writes leave no temporary file") {
  TempDir dir;
  const auto path = dir.path / "sub" / "out.txt";
  atomic_write(path, "first");
  atomic_write(path, "second");
  CHECK(slurp(path) == "second");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(path.parent_path())) ++entries;
  CHECK(entries == 1);
}

TEST_CASE("reports round-trip through JSON") {
  EvaluationReport r;
  r.model = "cnn-lstm";
  r.protocol = Protocol::P4;
  r.split = "inter:A->B";
  r.dof = {{"fe", 0.91}, {"ps", 0.1 + 0.2}, {"ru", -0.25}};
  r.k = 58;
  r.matrix_mode = MatrixMode::temporal;
  r.runtime_s = 12.5;
  r.input_length = 102;
  r.sequences = 1234;
  r.trajectory.time = {0.1, 0.15};
  r.trajectory.truth = Tensor64::matrix({{1, 2, 3}, {4, 5, 6}});
  r.trajectory.pred = Tensor64::matrix({{1.5, 2, 3}, {4, 5.25, 1e-300}});
  const auto back = reports_from_json(reports_to_json({r, r}));
  REQUIRE(back.size() == 2);
  CHECK(back[0] == r);
  CHECK(back[1].score("ps").r2 == 0.1 + 0.2);
  CHECK_THROWS_AS(reports_from_json("{not json"), DataError);
  CHECK(std::stod(format_double(0.1 + 0.2)) == 0.1 + 0.2);
}
