#include "emgkin/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unistd.h>

#include "emgkin/error.hpp"

namespace emgkin {
namespace {

using nlohmann::json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line;  // 1-based file line of each row
};

CsvTable read_csv(const fs::path& path) {
  const std::string text = read_file(path);
  const std::string name = path.filename().string();
  CsvTable t;
  std::size_t lineno = 0;
  for (std::string_view raw : split(text, '\n')) {
    ++lineno;
    const std::string_view l = trim(raw);
    if (l.empty()) continue;
    const auto cells = split(l, ',');
    if (t.header.empty()) {
      for (auto c : cells) t.header.emplace_back(trim(c));
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw LoadError(name, lineno, "expected " + std::to_string(t.header.size()) + " cells, found " +
                                        std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (auto c : cells) {
      c = trim(c);
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size()) {
        throw LoadError(name, lineno, "unparsable cell '" + std::string(c) + "'");
      }
      if (!std::isfinite(v)) throw LoadError(name, lineno, "non-finite cell");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
    t.line.push_back(lineno);
  }
  if (t.header.empty()) throw LoadError(name, 0, "empty file");
  if (t.rows.size() < 2) throw LoadError(name, 0, "fewer than two data rows");
  return t;
}

void check_time(const CsvTable& t, const std::string& name, double declared_fs) {
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    if (!(t.rows[i][0] > t.rows[i - 1][0])) {
      throw LoadError(name, t.line[i], "timestamps are not strictly increasing");
    }
  }
  const double span = t.rows.back()[0] - t.rows.front()[0];
  const double fs_est = static_cast<double>(t.rows.size() - 1) / span;
  if (std::abs(fs_est - declared_fs) > 0.01 * declared_fs) {
    throw LoadError(name, 0, "sampling rate " + format_double(fs_est) + " Hz is not within 1% of " +
                                 format_double(declared_fs) + " Hz");
  }
}

std::string csv_line(std::initializer_list<std::string> cells) {
  std::string s;
  for (const auto& c : cells) {
    if (!s.empty()) s += ',';
    s += c;
  }
  return s + '\n';
}

// ---- checkpoint byte helpers ----

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  std::uint64_t uint(std::size_t bytes, const std::string& field) {
    need(bytes, field);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += bytes;
    return v;
  }
  std::string_view bytes(std::size_t n, const std::string& field) {
    need(n, field);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n, const std::string& field) {
    if (data_.size() - pos_ < n) throw CorruptCheckpointError(field, "file is truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

json filter_json(const FilterSpec& s) {
  return {{"order", s.order}, {"cutoff_hz", s.cutoff_hz}, {"bandwidth_hz", s.bandwidth_hz}};
}
FilterSpec filter_from(const json& j, FilterKind kind) {
  return {kind, j.at("order").get<int>(), j.at("cutoff_hz").get<double>(),
          j.at("bandwidth_hz").get<double>()};
}

const char* kind_name(OptimizerKind k) { return k == OptimizerKind::sgdm ? "sgdm" : "adam"; }

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgdm") return OptimizerKind::sgdm;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + s + "' (expected sgdm or adam)");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void atomic_write(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp);
      throw DataError("write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

// ---- sessions ----

void save_session(const SemgRecording& rec, const fs::path& dir) {
  fs::create_directories(dir);
  std::string emg = "t";
  for (std::size_t n = 0; n < rec.channels(); ++n) emg += ",ch" + std::to_string(n + 1);
  emg += '\n';
  for (std::size_t i = 0; i < rec.emg_samples(); ++i) {
    emg += format_double(rec.emg_time(i));
    for (std::size_t n = 0; n < rec.channels(); ++n) emg += ',' + format_double(rec.emg(i, n));
    emg += '\n';
  }
  atomic_write(dir / "emg.csv", emg);

  const auto dofs = active_dofs(rec.protocol);
  std::string ang = "t,fe,ps,ru\n";
  for (std::size_t i = 0; i < rec.angle_samples(); ++i) {
    double full[kAllDofs] = {0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < dofs.size(); ++j) full[static_cast<std::size_t>(dofs[j])] = rec.angles(i, j);
    ang += csv_line({format_double(rec.angle_time(i)), format_double(full[0]), format_double(full[1]),
                     format_double(full[2])});
  }
  atomic_write(dir / "angles.csv", ang);

  const json meta = {{"protocol", to_string(rec.protocol)},
                     {"session_id", rec.session_id},
                     {"fs_emg", rec.fs_emg},
                     {"fs_ang", rec.fs_ang}};
  atomic_write(dir / "meta.json", meta.dump(2) + "\n");
}

SemgRecording load_session(const fs::path& dir, std::size_t expected_channels) {
  if (!fs::is_directory(dir)) throw DataError("session directory " + dir.string() + " does not exist");
  SemgRecording rec;
  rec.session_id = dir.filename().string();
  std::optional<Protocol> protocol;
  if (fs::exists(dir / "meta.json")) {
    try {
      const json meta = json::parse(read_file(dir / "meta.json"));
      if (meta.contains("protocol")) protocol = parse_protocol(meta["protocol"].get<std::string>());
      if (meta.contains("session_id")) rec.session_id = meta["session_id"].get<std::string>();
      if (meta.contains("fs_emg")) rec.fs_emg = meta["fs_emg"].get<double>();
      if (meta.contains("fs_ang")) rec.fs_ang = meta["fs_ang"].get<double>();
    } catch (const json::exception& e) {
      throw LoadError("meta.json", 0, e.what());
    }
  }

  const CsvTable emg = read_csv(dir / "emg.csv");
  if (emg.header.empty() || emg.header[0] != "t") throw LoadError("emg.csv", 1, "first column must be t");
  if (emg.header.size() - 1 != expected_channels) {
    throw LoadError("emg.csv", 1, "expected " + std::to_string(expected_channels) +
                                      " channel columns, found " + std::to_string(emg.header.size() - 1));
  }
  for (std::size_t n = 1; n < emg.header.size(); ++n) {
    if (emg.header[n] != "ch" + std::to_string(n)) {
      throw LoadError("emg.csv", 1, "column " + std::to_string(n + 1) + " must be ch" + std::to_string(n));
    }
  }
  check_time(emg, "emg.csv", rec.fs_emg);

  const CsvTable ang = read_csv(dir / "angles.csv");
  if (ang.header != std::vector<std::string>{"t", "fe", "ps", "ru"}) {
    throw LoadError("angles.csv", 1, "header must be t,fe,ps,ru");
  }
  check_time(ang, "angles.csv", rec.fs_ang);

  if (!protocol) {
    std::vector<Dof> moving;
    for (std::size_t d = 0; d < kAllDofs; ++d) {
      for (const auto& row : ang.rows) {
        if (row[d + 1] != 0.0) {
          moving.push_back(static_cast<Dof>(d));
          break;
        }
      }
    }
    for (Protocol p : {Protocol::P1, Protocol::P2, Protocol::P3, Protocol::P4}) {
      if (active_dofs(p) == moving) protocol = p;
    }
    if (!protocol) throw LoadError("angles.csv", 0, "cannot infer the protocol from the moving DoFs");
  }
  rec.protocol = *protocol;

  rec.emg_t0 = emg.rows.front()[0];
  rec.emg = Tensor64({emg.rows.size(), expected_channels});
  for (std::size_t i = 0; i < emg.rows.size(); ++i) {
    for (std::size_t n = 0; n < expected_channels; ++n) rec.emg(i, n) = emg.rows[i][n + 1];
  }
  const auto dofs = active_dofs(rec.protocol);
  rec.ang_t0 = ang.rows.front()[0];
  rec.angles = Tensor64({ang.rows.size(), dofs.size()});
  for (std::size_t i = 0; i < ang.rows.size(); ++i) {
    for (std::size_t j = 0; j < dofs.size(); ++j) {
      rec.angles(i, j) = ang.rows[i][static_cast<std::size_t>(dofs[j]) + 1];
    }
  }
  validate(rec);
  return rec;
}

std::vector<fs::path> session_dirs(const fs::path& data) {
  if (!fs::is_directory(data)) throw ConfigError("data directory " + data.string() + " does not exist");
  if (fs::exists(data / "emg.csv")) return {data};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(data)) {
    if (e.is_directory() && fs::exists(e.path() / "emg.csv")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw ConfigError("no session found under " + data.string());
  return out;
}

// ---- checkpoints ----

void save_model(HybridModel& model, const fs::path& path) {
  const auto& a = model.cnn.architecture();
  json desc;
  desc["kind"] = "cnn-lstm";
  desc["protocol"] = to_string(model.protocol);
  desc["k"] = model.k;
  desc["dropout"] = model.dropout;
  desc["matrix_mode"] = to_string(model.prep.mode);
  desc["window"] = model.prep.window;
  desc["hop"] = model.prep.hop;
  desc["n_fft"] = model.prep.n_fft;
  desc["filters"] = {{"highpass", filter_json(model.prep.filters.highpass)},
                     {"lowpass", filter_json(model.prep.filters.lowpass)},
                     {"notch", filter_json(model.prep.filters.notch)}};
  desc["norm"] = {{"min", model.prep.norm.min}, {"max", model.prep.norm.max}};
  desc["scaler"] = {{"mean", model.scaler.mean}, {"scale", model.scaler.scale}};
  desc["cnn"] = {{"input_length", a.input_length}, {"input_channels", a.input_channels},
                 {"conv_channels", a.conv_channels}, {"fc_units", a.fc_units},
                 {"outputs", a.outputs}, {"kernel", a.kernel}, {"pool", a.pool},
                 {"leaky_slope", a.leaky_slope}, {"dropout", a.dropout}};
  desc["lstm"] = {{"input", model.lstm.input_dim}, {"hidden", model.lstm.hidden},
                  {"outputs", model.lstm.outputs}};
  auto tensors = model.cnn.state();
  for (auto& t : model.lstm.state()) tensors.push_back(t);
  std::uint64_t count = 0;
  json list = json::array();
  for (const auto& t : tensors) {
    list.push_back({{"name", t.name}, {"shape", t.tensor->shape()}});
    count += t.tensor->size();
  }
  desc["tensors"] = list;

  const std::string text = desc.dump();
  std::string out = "EMGK";
  put_u32(out, kCheckpointVersion);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  put_u64(out, count);
  for (const auto& t : tensors) {
    for (float v : t.tensor->data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  atomic_write(path, out);
}

HybridModel load_model(const fs::path& path) {
  std::string data;
  try {
    data = read_file(path);
  } catch (const DataError& e) {
    throw CorruptCheckpointError("file", e.what());
  }
  Reader r(data);
  if (r.bytes(4, "magic") != "EMGK") throw CorruptCheckpointError("magic", "expected EMGK");
  const auto version = static_cast<unsigned>(r.uint(4, "version"));
  if (version != kCheckpointVersion) throw UnsupportedVersionError(version);
  if (r.uint(4, "kind") != 1) throw CorruptCheckpointError("kind", "unknown model kind");
  const auto desc_len = r.uint(4, "descriptor");
  const auto text = r.bytes(desc_len, "descriptor");

  json desc;
  try {
    desc = json::parse(text);
  } catch (const json::exception& e) {
    throw CorruptCheckpointError("descriptor", e.what());
  }
  std::optional<HybridModel> model;
  try {
    CnnArchitecture a;
    const auto& c = desc.at("cnn");
    a.input_length = c.at("input_length");
    a.input_channels = c.at("input_channels");
    a.conv_channels = c.at("conv_channels").get<std::vector<std::size_t>>();
    a.fc_units = c.at("fc_units").get<std::vector<std::size_t>>();
    a.outputs = c.at("outputs");
    a.kernel = c.at("kernel");
    a.pool = c.at("pool");
    a.leaky_slope = c.at("leaky_slope");
    a.dropout = c.at("dropout");
    const auto& l = desc.at("lstm");
    Preprocessor prep;
    prep.filters.highpass = filter_from(desc.at("filters").at("highpass"), FilterKind::butter_high);
    prep.filters.lowpass = filter_from(desc.at("filters").at("lowpass"), FilterKind::butter_low);
    prep.filters.notch = filter_from(desc.at("filters").at("notch"), FilterKind::notch);
    prep.norm.min = desc.at("norm").at("min").get<std::vector<double>>();
    prep.norm.max = desc.at("norm").at("max").get<std::vector<double>>();
    prep.window = desc.at("window");
    prep.hop = desc.at("hop");
    prep.n_fft = desc.at("n_fft");
    prep.mode = parse_matrix_mode(desc.at("matrix_mode").get<std::string>());
    TargetScaler scaler{desc.at("scaler").at("mean").get<std::vector<double>>(),
                        desc.at("scaler").at("scale").get<std::vector<double>>()};
    model.emplace(HybridModel{CnnModel<float>(a, 0),
                              LstmParams<float>(l.at("input"), l.at("hidden"), l.at("outputs")),
                              prep, scaler, desc.at("k").get<std::size_t>(),
                              parse_protocol(desc.at("protocol").get<std::string>()),
                              desc.at("dropout").get<double>()});
  } catch (const json::exception& e) {
    throw CorruptCheckpointError("descriptor", e.what());
  } catch (const ConfigError& e) {
    throw CorruptCheckpointError("descriptor", e.what());
  }
  model->cnn.set_mode(Mode::eval);

  auto tensors = model->cnn.state();
  for (auto& t : model->lstm.state()) tensors.push_back(t);
  const json& list = desc.at("tensors");
  if (!list.is_array() || list.size() != tensors.size()) {
    throw CorruptCheckpointError("tensors", "expected " + std::to_string(tensors.size()) + " tensors");
  }
  std::uint64_t expected = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::string field = "tensors[" + std::to_string(i) + "]";
    if (list[i].value("name", std::string()) != tensors[i].name) {
      throw CorruptCheckpointError(field + ".name", "expected " + tensors[i].name);
    }
    Shape shape;
    try {
      shape = list[i].at("shape").get<Shape>();
    } catch (const json::exception& e) {
      throw CorruptCheckpointError(field + ".shape", e.what());
    }
    if (shape != tensors[i].tensor->shape()) {
      throw CorruptCheckpointError(field + ".shape", shape_string(shape) + " does not match " +
                                                        shape_string(tensors[i].tensor->shape()));
    }
    expected += tensors[i].tensor->size();
  }
  const auto count = r.uint(8, "blob");
  if (count != expected) {
    throw CorruptCheckpointError("blob", "declares " + std::to_string(count) + " values, shapes need " +
                                             std::to_string(expected));
  }
  if (r.remaining() != count * 4) {
    throw CorruptCheckpointError("blob", "holds " + std::to_string(r.remaining()) + " bytes, expected " +
                                             std::to_string(count * 4));
  }
  for (auto& t : tensors) {
    for (float& v : t.tensor->data()) {
      v = std::bit_cast<float>(static_cast<std::uint32_t>(r.uint(4, "blob")));
    }
  }
  return std::move(*model);
}

// ---- configuration ----

namespace {

using Setter = std::function<void(TrainingConfig&, const json&)>;

template <typename V>
Setter set(V TrainingConfig::*member) {
  return [member](TrainingConfig& c, const json& v) { c.*member = v.get<V>(); };
}
template <typename V>
Setter set_opt(OptimizerConfig TrainingConfig::*opt, V OptimizerConfig::*member) {
  return [opt, member](TrainingConfig& c, const json& v) { (c.*opt).*member = v.get<V>(); };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    t["protocol"] = [](TrainingConfig& c, const json& v) { c.protocol = parse_protocol(v.get<std::string>()); };
    t["matrix_mode"] = [](TrainingConfig& c, const json& v) {
      c.matrix_mode = parse_matrix_mode(v.get<std::string>());
    };
    t["window_ms"] = set(&TrainingConfig::window_ms);
    t["hop_ms"] = set(&TrainingConfig::hop_ms);
    t["n_fft"] = set(&TrainingConfig::n_fft);
    t["k"] = set(&TrainingConfig::k);
    t["dropout"] = set(&TrainingConfig::dropout);
    t["leaky_slope"] = set(&TrainingConfig::leaky_slope);
    t["seed"] = set(&TrainingConfig::seed);
    t["split"] = set(&TrainingConfig::split);
    t["duration_s"] = set(&TrainingConfig::duration_s);
    t["lstm.hidden"] = set(&TrainingConfig::lstm_hidden);
    for (auto [prefix, opt] : {std::pair{"cnn", &TrainingConfig::cnn}, std::pair{"lstm", &TrainingConfig::lstm}}) {
      const std::string p = std::string(prefix) + ".";
      t[p + "epochs"] = set_opt(opt, &OptimizerConfig::epochs);
      t[p + "batch"] = set_opt(opt, &OptimizerConfig::batch_size);
      t[p + "lr0"] = set_opt(opt, &OptimizerConfig::lr0);
      t[p + "decay_factor"] = set_opt(opt, &OptimizerConfig::decay_factor);
      t[p + "decay_every"] = set_opt(opt, &OptimizerConfig::decay_every);
      t[p + "momentum"] = set_opt(opt, &OptimizerConfig::momentum);
      t[p + "beta1"] = set_opt(opt, &OptimizerConfig::beta1);
      t[p + "beta2"] = set_opt(opt, &OptimizerConfig::beta2);
      t[p + "epsilon"] = set_opt(opt, &OptimizerConfig::epsilon);
      t[p + "optimizer"] = [opt](TrainingConfig& c, const json& v) {
        (c.*opt).kind = parse_optimizer(v.get<std::string>());
      };
    }
    t["filters.highpass_hz"] = [](TrainingConfig& c, const json& v) { c.filters.highpass.cutoff_hz = v; };
    t["filters.lowpass_hz"] = [](TrainingConfig& c, const json& v) { c.filters.lowpass.cutoff_hz = v; };
    t["filters.order"] = [](TrainingConfig& c, const json& v) {
      c.filters.highpass.order = v;
      c.filters.lowpass.order = v;
    };
    t["filters.notch_hz"] = [](TrainingConfig& c, const json& v) { c.filters.notch.cutoff_hz = v; };
    t["filters.notch_bandwidth_hz"] = [](TrainingConfig& c, const json& v) {
      c.filters.notch.bandwidth_hz = v;
    };
    return t;
  }();
  return table;
}

void apply_json(TrainingConfig& config, std::string_view key, const json& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  try {
    it->second(config, value);
  } catch (const json::exception&) {
    throw ConfigError("config key '" + std::string(key) + "' has the wrong type: " + value.dump());
  }
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (const auto& [key, value] : j.items()) {
    const std::string full = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      flatten(value, full, out);
    } else {
      out.emplace_back(full, value);
    }
  }
}

}  // namespace

void apply_config_value(TrainingConfig& config, std::string_view key, const std::string& json_value) {
  json v = json::parse(json_value, nullptr, false);
  if (v.is_discarded()) v = json_value;  // bare words such as P1 or spectral
  apply_json(config, key, v);
}

TrainingConfig load_config(const fs::path& path, TrainingConfig base) {
  if (!fs::exists(path)) throw ConfigError("config file " + path.string() + " does not exist");
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError(path.string() + " is not a JSON object");
  TrainingConfig config = std::move(base);
  if (j.contains("preset")) {
    const auto preset = j["preset"];
    if (preset == "desk") {
      config = TrainingConfig::desk();
    } else if (preset == "paper") {
      config = TrainingConfig::paper();
    } else {
      throw ConfigError("unknown preset " + preset.dump() + " (expected paper or desk)");
    }
    j.erase("preset");
  }
  std::vector<std::pair<std::string, json>> entries;
  flatten(j, "", entries);
  for (const auto& [key, value] : entries) apply_json(config, key, value);
  config.validate();
  return config;
}

std::string config_to_json(const TrainingConfig& c) {
  const auto opt = [](const OptimizerConfig& o) {
    return json{{"optimizer", kind_name(o.kind)}, {"epochs", o.epochs}, {"batch", o.batch_size},
                {"lr0", o.lr0}, {"decay_factor", o.decay_factor}, {"decay_every", o.decay_every},
                {"momentum", o.momentum}, {"beta1", o.beta1}, {"beta2", o.beta2},
                {"epsilon", o.epsilon}};
  };
  json lstm = opt(c.lstm);
  lstm["hidden"] = c.lstm_hidden;
  const json j = {{"protocol", to_string(c.protocol)},
                  {"matrix_mode", to_string(c.matrix_mode)},
                  {"window_ms", c.window_ms},
                  {"hop_ms", c.hop_ms},
                  {"n_fft", c.n_fft},
                  {"k", c.k},
                  {"dropout", c.dropout},
                  {"leaky_slope", c.leaky_slope},
                  {"seed", c.seed},
                  {"split", c.split},
                  {"duration_s", c.duration_s},
                  {"cnn", opt(c.cnn)},
                  {"lstm", lstm},
                  {"filters",
                   {{"highpass_hz", c.filters.highpass.cutoff_hz},
                    {"lowpass_hz", c.filters.lowpass.cutoff_hz},
                    {"order", c.filters.highpass.order},
                    {"notch_hz", c.filters.notch.cutoff_hz},
                    {"notch_bandwidth_hz", c.filters.notch.bandwidth_hz}}}};
  return j.dump(2);
}

// ---- reports ----

namespace {

json rows_json(const Tensor64& t) {
  json out = json::array();
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    const auto r = t.row(i);
    out.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return out;
}

Tensor64 rows_from(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return {};
  Tensor64 t({rows.size(), rows[0].size()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw DataError("ragged trajectory rows");
    std::copy(rows[i].begin(), rows[i].end(), t.row(i).begin());
  }
  return t;
}

json report_json(const EvaluationReport& r) {
  json dof = json::array();
  for (const auto& d : r.dof) dof.push_back({{"name", d.name}, {"r2", d.r2}});
  return {{"model", r.model},
          {"protocol", to_string(r.protocol)},
          {"split", r.split},
          {"dof", dof},
          {"k", r.k},
          {"matrix_mode", to_string(r.matrix_mode)},
          {"runtime_s", r.runtime_s},
          {"input_length", r.input_length},
          {"sequences", r.sequences},
          {"trajectory",
           {{"t", r.trajectory.time}, {"true", rows_json(r.trajectory.truth)},
            {"pred", rows_json(r.trajectory.pred)}}}};
}

EvaluationReport report_from(const json& j) {
  EvaluationReport r;
  r.model = j.at("model");
  r.protocol = parse_protocol(j.at("protocol").get<std::string>());
  r.split = j.at("split");
  for (const auto& d : j.at("dof")) r.dof.push_back({d.at("name"), d.at("r2")});
  r.k = j.at("k");
  r.matrix_mode = parse_matrix_mode(j.at("matrix_mode").get<std::string>());
  r.runtime_s = j.at("runtime_s");
  r.input_length = j.value("input_length", std::size_t{0});
  r.sequences = j.value("sequences", std::size_t{0});
  if (j.contains("trajectory")) {
    const auto& t = j["trajectory"];
    r.trajectory.time = t.at("t").get<std::vector<double>>();
    r.trajectory.truth = rows_from(t.at("true"));
    r.trajectory.pred = rows_from(t.at("pred"));
  }
  return r;
}

}  // namespace

std::string reports_to_json(const std::vector<EvaluationReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(report_json(r));
  return arr.dump(2);
}

std::vector<EvaluationReport> reports_from_json(std::string_view text) {
  try {
    const json arr = json::parse(text);
    std::vector<EvaluationReport> out;
    for (const auto& j : arr) out.push_back(report_from(j));
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

void write_reports(const fs::path& path, const std::vector<EvaluationReport>& reports) {
  atomic_write(path, reports_to_json(reports) + "\n");
}

std::vector<EvaluationReport> read_reports(const fs::path& path) {
  return reports_from_json(read_file(path));
}

void write_trajectory_csv(const fs::path& path, const EvaluationReport& report) {
  const auto& t = report.trajectory;
  std::string out = "t,true,pred,dof\n";
  for (std::size_t j = 0; j < report.dof.size(); ++j) {
    for (std::size_t i = 0; i < t.time.size(); ++i) {
      out += csv_line({format_double(t.time[i]), format_double(t.truth(i, j)),
                       format_double(t.pred(i, j)), report.dof[j].name});
    }
  }
  atomic_write(path, out);
}

void write_loss_csv(const fs::path& path, const std::vector<double>& cnn_loss,
                    const std::vector<double>& lstm_loss) {
  std::string out = "epoch,stage,loss\n";
  for (std::size_t e = 0; e < cnn_loss.size(); ++e) {
    out += csv_line({std::to_string(e), "cnn", format_double(cnn_loss[e])});
  }
  for (std::size_t e = 0; e < lstm_loss.size(); ++e) {
    out += csv_line({std::to_string(e), "lstm", format_double(lstm_loss[e])});
  }
  atomic_write(path, out);
}

void write_scatter_csv(const fs::path& path, const std::vector<ScatterSet>& sets, Protocol protocol) {
  const auto dofs = active_dofs(protocol);
  std::string out = "x,y,angle,dof,feature_kind\n";
  for (const auto& s : sets) {
    if (s.points.dim(0) != s.angles.dim(0) || s.angles.dim(1) != dofs.size()) {
      throw DimensionError("scatter set " + s.feature_kind + " has mismatched rows");
    }
    for (std::size_t j = 0; j < dofs.size(); ++j) {
      for (std::size_t i = 0; i < s.points.dim(0); ++i) {
        out += csv_line({format_double(s.points(i, 0)), format_double(s.points(i, 1)),
                         format_double(s.angles(i, j)), dof_name(dofs[j]), s.feature_kind});
      }
    }
  }
  atomic_write(path, out);
}

}  // namespace emgkin
