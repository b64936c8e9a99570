// Runs every end-to-end acceptance criterion and prints one PASS/FAIL line
// per criterion. Exit status is nonzero when any criterion fails.

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <unistd.h>

#include "check.hpp"
#include "emgkin/io.hpp"
#include "emgkin/parallel.hpp"
#include "emgkin/synth.hpp"

using namespace emgkin;
using test::dot;
using test::max_relative_error;
using test::numeric_gradient;
using test::random_tensor;

namespace {

// Tolerances.
constexpr double kGradTol = 1e-4;
constexpr double kGradBudgetS = 60.0;
constexpr double kMetricTol = 1e-12;
constexpr double kCutoffDb = 0.5;
constexpr double kNotchDb = 20.0;
constexpr double kDcRejection = 1e-3;
constexpr double kPassbandDb = 1.0;
constexpr double kP1MinR2 = 0.8;
constexpr double kP1BudgetS = 600.0;
constexpr double kThreadLossRel = 1e-5;
constexpr double kKrrInterp = 1e-6;
constexpr double kKrrMinR2 = 0.5;

constexpr std::uint64_t kP1DataSeed = 7;
constexpr std::uint64_t kP4DataSeed = 3;
constexpr std::uint64_t kPairDataSeed = 11;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

SemgRecording session(Protocol p, std::uint64_t seed, double seconds = 60.0) {
  SynthConfig c;
  c.protocol = p;
  c.duration_s = seconds;
  c.seed = seed;
  return generate(c);
}

// ---- gradients ----------------------------------------------------------

template <typename Forward, typename Backward>
double layer_error(Tensor64 x, const Tensor64& r, Forward forward, Backward backward,
                   std::vector<Parameter<double>*> params) {
  const auto f = [&] { return dot(r, forward(x)); };
  forward(x);
  double worst = max_relative_error(backward(r), numeric_gradient(f, x));
  for (auto* p : params) {
    forward(x);
    backward(r);
    const Tensor64 analytic = p->grad;
    worst = std::max(worst, max_relative_error(analytic, numeric_gradient(f, p->value)));
  }
  return worst;
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  std::vector<std::pair<std::string, double>> errors;
  Rng rng(1);

  Conv1d<double> conv(3, 4, 3, "conv");
  conv.init(2.0, rng);
  fill_normal(conv.bias.value, 0.5, rng);
  errors.emplace_back("conv", layer_error(random_tensor({2, 7, 3}, 2), random_tensor({2, 7, 4}, 3),
                                          [&](const Tensor64& x) { return conv.forward(x); },
                                          [&](const Tensor64& g) { return conv.backward(g); },
                                          conv.parameters()));
  for (Mode mode : {Mode::train, Mode::eval}) {
    BatchNorm<double> bn(3, "bn");
    fill_normal(bn.gamma.value, 1.0, rng);
    fill_normal(bn.beta.value, 1.0, rng);
    bn.running_mean = random_tensor({3}, 4);
    bn.running_var = random_tensor({3}, 5, 0.5, 2.0);
    errors.emplace_back(mode == Mode::train ? "batchnorm(train)" : "batchnorm(eval)",
                        layer_error(random_tensor({4, 5, 3}, 6), random_tensor({4, 5, 3}, 7),
                                    [&](const Tensor64& x) { return bn.forward(x, mode); },
                                    [&](const Tensor64& g) { return bn.backward(g); }, bn.parameters()));
  }
  LeakyRelu<double> act(0.1);
  Tensor64 xa = random_tensor({3, 10}, 8);
  for (auto& v : xa.data()) {
    if (std::abs(v) < 1e-3) v = 0.5;
  }
  errors.emplace_back("leaky_relu", layer_error(xa, random_tensor({3, 10}, 9),
                                                [&](const Tensor64& x) { return act.forward(x); },
                                                [&](const Tensor64& g) { return act.backward(g); }, {}));
  MaxPool1d<double> pool(3, 1);
  errors.emplace_back("maxpool", layer_error(random_tensor({2, 9, 3}, 10), random_tensor({2, 7, 3}, 11),
                                             [&](const Tensor64& x) { return pool.forward(x); },
                                             [&](const Tensor64& g) { return pool.backward(g); }, {}));
  Dropout<double> drop(0.3);
  errors.emplace_back("dropout(off)",
                      layer_error(random_tensor({4, 6}, 12), random_tensor({4, 6}, 13),
                                  [&](const Tensor64& x) { return drop.forward(x, Mode::eval, rng); },
                                  [&](const Tensor64& g) { return drop.backward(g); }, {}));
  Dense<double> fc(5, 4, "fc");
  fc.init(2.0, rng);
  fill_normal(fc.bias.value, 0.5, rng);
  errors.emplace_back("fc", layer_error(random_tensor({3, 5}, 14), random_tensor({3, 4}, 15),
                                        [&](const Tensor64& x) { return fc.forward(x); },
                                        [&](const Tensor64& g) { return fc.backward(g); }, fc.parameters()));
  {
    Tensor64 pred = random_tensor({3, 2}, 16);
    const Tensor64 target = random_tensor({3, 2}, 17);
    const auto res = mse_loss(pred, target);
    errors.emplace_back("mse", max_relative_error(
                                   res.grad, numeric_gradient([&] { return mse_loss(pred, target).loss; }, pred)));
  }
  double lstm_worst = 0.0;
  for (std::size_t k = 1; k <= 5; ++k) {
    LstmParams<double> p(3, 4, 2);
    std::uint64_t s = 100 * k;
    for (auto* q : p.parameters()) q->value = random_tensor(q->value.shape(), ++s, -0.8, 0.8);
    Tensor64 x = random_tensor({2, k, 3}, 200 + k);
    const Tensor64 r = random_tensor({2, 2}, 300 + k);
    LstmRegressor<double> net(0.3);
    Rng drop_rng(0);
    const auto loss = [&] { return dot(r, net.forward(p, x, Mode::eval, drop_rng)); };
    net.forward(p, x, Mode::eval, drop_rng);
    net.backward(p, r);
    std::vector<Tensor64> analytic;
    for (auto* q : p.parameters()) analytic.push_back(q->grad);
    std::size_t i = 0;
    for (auto* q : p.parameters()) {
      lstm_worst = std::max(lstm_worst, max_relative_error(analytic[i++], numeric_gradient(loss, q->value)));
    }
  }
  errors.emplace_back("lstm_bptt(k<=5)", lstm_worst);

  const double elapsed = seconds_since(t0);
  bool ok = elapsed < kGradBudgetS;
  std::string detail;
  for (const auto& [name, err] : errors) {
    ok = ok && err < kGradTol;
    detail += name + "=" + fmt(err, 2) + " ";
  }
  return {ok, detail + "time=" + fmt(elapsed, 3) + "s"};
}

// ---- metric ----------------------------------------------------------------

Outcome metric_suite() {
  const std::vector<double> a{1.0, 4.0, -2.0, 3.5, 0.0, 2.25};
  std::vector<double> shifted(a), noisy(a);
  for (auto& v : shifted) v += 5.0;
  for (std::size_t i = 0; i < a.size(); ++i) noisy[i] += 0.3 * std::sin(1.7 * i);
  const double perfect = r_squared(a, a);
  const double constant = r_squared(a, std::vector<double>(a.size(), 1.5));
  const double offset = r_squared(a, shifted);
  std::vector<double> a2(a.size()), y2(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a2[i] = -3.0 * a[i] + 7.0;
    y2[i] = -3.0 * noisy[i] + 7.0;
  }
  const double affine = std::abs(r_squared(a, noisy) - r_squared(a2, y2));
  const bool ok = std::abs(perfect - 1.0) < kMetricTol && std::abs(constant) < kMetricTol &&
                  std::abs(offset - 1.0) < kMetricTol && affine < kMetricTol;
  return {ok, "perfect=" + fmt(perfect, 17) + " constant=" + fmt(constant, 3) + " offset=" +
                  fmt(offset, 17) + " affine_diff=" + fmt(affine, 2)};
}

// ---- DSP ---------------------------------------------------------------

Outcome dsp_responses() {
  constexpr double fs = 1024.0;
  const FilterChainConfig chain;
  const auto hp = design_filter(chain.highpass, fs);
  const auto lp = design_filter(chain.lowpass, fs);
  const auto db = [](double m) { return 20.0 * std::log10(m); };
  const double hp_db = db(hp.magnitude(20.0, fs));
  const double lp_db = db(lp.magnitude(450.0, fs));
  const double notch_db = db(design_filter(chain.notch, fs).magnitude(50.0, fs));
  const auto full = design_chain(chain, fs);
  const double pass_db = db(full.magnitude(100.0, fs));

  // DC through the applied chain, after the transient.
  SemgRecording rec;
  rec.emg = Tensor64({8192, 1}, 1.0);
  rec.angles = Tensor64({80, 1}, 0.0);
  const auto out = apply_filter_chain(rec, chain);
  double dc = 0.0;
  for (std::size_t i = 8192 - 1024; i < 8192; ++i) dc = std::max(dc, std::abs(out.emg(i, 0)));

  const bool ok = std::abs(hp_db + 3.0103) <= kCutoffDb && std::abs(lp_db + 3.0103) <= kCutoffDb &&
                  notch_db <= -kNotchDb && dc < kDcRejection && std::abs(pass_db) <= kPassbandDb;
  return {ok, "hp@20=" + fmt(hp_db) + "dB lp@450=" + fmt(lp_db) + "dB notch@50=" + fmt(notch_db) +
                  "dB dc=" + fmt(dc, 2) + " chain@100=" + fmt(pass_db) + "dB"};
}

// ---- shapes ----------------------------------------------------------------

Outcome shape_audit() {
  const auto rec = session(Protocol::P1, 1, 2.0);
  const TrainingConfig cfg;
  const auto prep = fit_preprocessor(cfg, rec);
  const auto m = prep.matrices(rec);
  const Shape shape = m.front().values.shape();
  const auto arch = architecture_for(cfg, prep.matrix_length(), 6, 1);
  CnnModel<float> cnn(arch, 1);
  const auto lengths = arch.block_lengths();
  const Tensor batch = stack_matrices({m[0], m[1]}).inputs;
  const Tensor f = cnn.extract(batch);
  const bool ok = shape == Shape{1, 101, 6} &&
                  lengths == std::vector<std::size_t>{101, 99, 97, 95, 93} &&
                  f.shape() == Shape{2, 20};
  std::string chain;
  for (auto l : lengths) chain += (chain.empty() ? "" : "->") + std::to_string(l);
  return {ok, "matrix=" + shape_string(shape) + " lengths=" + chain + " features=" + shape_string(f.shape())};
}

// ---- end-to-end runs ---------------------------------------------------------

struct P1Run {
  EvaluationRun run;
  SemgRecording test;
  double seconds = 0.0;
};

P1Run& p1_run() {
  static P1Run r = [] {
    const auto t0 = Clock::now();
    TrainingConfig cfg = TrainingConfig::desk();
    const auto rec = session(Protocol::P1, kP1DataSeed);
    auto [train, test] = split_session(rec);
    P1Run out{run_evaluation(cfg, train, test, "intra"), test, 0.0};
    out.seconds = seconds_since(t0);
    return out;
  }();
  return r;
}

const EvaluationReport& find(const std::vector<EvaluationReport>& reports, const std::string& model) {
  for (const auto& r : reports) {
    if (r.model == model) return r;
  }
  throw std::runtime_error("missing report " + model);
}

Outcome p1_intra() {
  const auto& r = p1_run();
  const double hybrid = find(r.run.reports, "cnn-lstm").mean_r2();
  const double cnn = find(r.run.reports, "cnn").mean_r2();
  const bool ok = hybrid >= kP1MinR2 && hybrid >= cnn && r.seconds <= kP1BudgetS;
  return {ok, "cnn-lstm=" + fmt(hybrid) + " cnn=" + fmt(cnn) + " runtime=" + fmt(r.seconds, 3) +
                  "s threads=" + std::to_string(thread_count())};
}

Outcome p4_intra() {
  const auto rec = session(Protocol::P4, kP4DataSeed);
  auto [train, test] = split_session(rec);
  const auto run = run_evaluation(TrainingConfig::desk(), train, test, "intra");
  const auto& hybrid = find(run.reports, "cnn-lstm");
  const auto& cnn = find(run.reports, "cnn");
  bool ok = hybrid.dof.size() == 3;
  std::string detail;
  for (const auto& d : hybrid.dof) {
    const double base = cnn.score(d.name).r2;
    ok = ok && d.r2 >= base;
    detail += d.name + ": cnn-lstm=" + fmt(d.r2) + " cnn=" + fmt(base) + "; ";
  }
  return {ok, detail};
}

Outcome inter_session() {
  SynthConfig sc;
  sc.duration_s = 60.0;
  sc.seed = kPairDataSeed;
  const auto [a, b] = generate_session_pair(sc);
  const SplitPlan plan{SplitMode::inter, 4, a.session_id, b.session_id};
  const auto inter = run_evaluation(TrainingConfig::desk(), a, b, split_label(plan));
  auto [train, test] = split_session(a);
  const auto intra = run_evaluation(TrainingConfig::desk(), train, test, "intra");
  bool ok = inter.reports.size() == 3;
  std::string detail;
  for (const auto& r : inter.reports) {
    ok = ok && std::isfinite(r.mean_r2()) && !r.dof.empty();
    detail += r.model + "(inter)=" + fmt(r.mean_r2()) + " ";
  }
  // The intra/inter ordering is reported but not required.
  const double intra_r2 = find(intra.reports, "cnn-lstm").mean_r2();
  const double inter_r2 = find(inter.reports, "cnn-lstm").mean_r2();
  return {ok, detail + "cnn-lstm(intra)=" + fmt(intra_r2) +
                  (intra_r2 >= inter_r2 ? " intra>=inter" : " intra<inter (soft)")};
}

Outcome k_sweep() {
  const auto rec = session(Protocol::P1, kP1DataSeed);
  auto [train, test] = split_session(rec);
  const TrainingConfig cfg = TrainingConfig::desk();
  const std::vector<std::size_t> ks{8, 18, 58, 98};
  const auto reports = sweep_timesteps(cfg, train, test, "intra", ks);
  const std::size_t m = fit_preprocessor(cfg, train).windows(test).size();
  bool ok = reports.size() == ks.size();
  std::ostringstream summary;
  summary << "M=" << m;
  for (std::size_t i = 0; i < reports.size() && i < ks.size(); ++i) {
    const auto& r = reports[i];
    ok = ok && r.k == ks[i] && r.sequences == m - ks[i] + 1 && r.trajectory.time.size() == r.sequences;
    summary << " | k=" << r.k << " seq=" << r.sequences << " r2=" << fmt(r.mean_r2());
  }
  return {ok, summary.str()};
}

Outcome matrix_modes() {
  const auto rec = session(Protocol::P1, kP1DataSeed);
  auto [train, test] = split_session(rec);
  const auto reports = compare_matrix_modes(TrainingConfig::desk(), train, test, "intra");
  const bool ok = reports.size() == 2 && reports[0].matrix_mode == MatrixMode::spectral &&
                  reports[1].matrix_mode == MatrixMode::temporal && reports[0].input_length == 101 &&
                  reports[1].input_length == 102;
  std::string detail;
  for (const auto& r : reports) {
    detail += to_string(r.matrix_mode) + "(L=" + std::to_string(r.input_length) + ")=" + fmt(r.mean_r2()) + " ";
  }
  return {ok, detail};
}

std::string checkpoint_bytes(HybridModel& model, const fs::path& path) {
  save_model(model, path);
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const auto dir = fs::temp_directory_path() / ("emgkin_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto rec = session(Protocol::P1, 5, 30.0);
  TrainingConfig cfg = TrainingConfig::desk();
  cfg.cnn.epochs = 2;
  cfg.lstm.epochs = 3;

  const std::size_t saved_threads = thread_count();
  set_thread_count(1);
  auto a = train_hybrid(cfg, rec);
  auto b = train_hybrid(cfg, rec);
  const bool same_bytes = checkpoint_bytes(a.model, dir / "a.bin") == checkpoint_bytes(b.model, dir / "b.bin");
  set_thread_count(4);
  auto c = train_hybrid(cfg, rec);
  set_thread_count(saved_threads);
  fs::remove_all(dir);

  const auto rel = [](double x, double y) { return std::abs(x - y) / std::max(std::abs(x), 1e-30); };
  const double cnn_rel = rel(a.cnn_loss.back(), c.cnn_loss.back());
  const double lstm_rel = rel(a.lstm_loss.back(), c.lstm_loss.back());
  const bool ok = same_bytes && cnn_rel <= kThreadLossRel && lstm_rel <= kThreadLossRel;
  return {ok, std::string("single-thread checkpoints ") + (same_bytes ? "identical" : "DIFFER") +
                  "; 4-thread final loss rel diff cnn=" + fmt(cnn_rel, 2) + " lstm=" + fmt(lstm_rel, 2)};
}

Outcome krr_baseline() {
  // Interpolation on 10 distinct points.
  const Tensor64 x = random_tensor({10, 3}, 1);
  Tensor64 y({10, 1});
  for (std::size_t i = 0; i < 10; ++i) y(i, 0) = std::sin(3.0 * x(i, 0)) + x(i, 1) * x(i, 2);
  const Tensor64 fit = predict_rows(fit_krr(x, y, 1.0, 0.0), x);
  double interp = 0.0;
  for (std::size_t i = 0; i < 10; ++i) interp = std::max(interp, std::abs(fit[i] - y[i]));

  // Training R^2 along the ridge grid never increases.
  const Tensor64 xs = random_tensor({60, 3}, 2);
  Tensor64 ys({60, 1});
  for (std::size_t i = 0; i < 60; ++i) ys(i, 0) = std::sin(2.0 * xs(i, 0)) + xs(i, 1);
  bool monotone = true;
  double previous = 2.0;
  std::string path;
  for (double lambda : KrrGrid{}.lambdas) {
    const Tensor64 p = predict_rows(fit_krr(xs, ys, 1.0, lambda), xs);
    const double r2 = r_squared(ys.data(), p.data());
    monotone = monotone && r2 <= previous + 1e-12;
    previous = r2;
    path += fmt(r2, 3) + " ";
  }
  const double p1 = find(p1_run().run.reports, "krr").mean_r2();
  const bool ok = interp < kKrrInterp && monotone && p1 > kKrrMinR2;
  return {ok, "interp_err=" + fmt(interp, 2) + " path=[" + path + "] p1_r2=" + fmt(p1)};
}

Outcome checkpoint_roundtrip() {
  const auto dir = fs::temp_directory_path() / ("emgkin_ckpt_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto& r = p1_run();
  auto& model = r.run.training.model;
  const auto path = dir / "m.bin";
  const std::string good = checkpoint_bytes(model, path);
  auto loaded = load_model(path);
  const bool identical = predict(loaded, r.test).pred == predict(model, r.test).pred;

  const auto field_of = [&](const std::string& bytes) -> std::string {
    std::ofstream(path, std::ios::binary) << bytes;
    try {
      load_model(path);
    } catch (const CorruptCheckpointError& e) {
      return e.field();
    }
    return "(accepted)";
  };
  std::string bad_magic = good;
  bad_magic[1] = '?';
  std::string bad_version = good;
  bad_version[4] = static_cast<char>(kCheckpointVersion + 7);
  std::string bad_name = good;
  bad_name[bad_name.find("conv1.conv.weight") + 4] = '8';
  const std::vector<std::pair<std::string, std::string>> cases{
      {"magic", field_of(bad_magic)},
      {"version", field_of(bad_version)},
      {"tensors[0].name", field_of(bad_name)},
      {"blob", field_of(good.substr(0, good.size() - 3))},
  };
  fs::remove_all(dir);
  bool ok = identical;
  std::string detail = std::string("predictions ") + (identical ? "identical" : "DIFFER") + "; corrupt:";
  for (const auto& [want, got] : cases) {
    ok = ok && want == got;
    detail += " " + got;
  }
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, Outcome (*)()>> criteria{
      {"gradient suite", gradient_suite},
      {"R^2 metric suite", metric_suite},
      {"DSP responses", dsp_responses},
      {"shape audit", shape_audit},
      {"P1 intra-session end-to-end", p1_intra},
      {"P4 intra-session per DoF", p4_intra},
      {"inter-session pair", inter_session},
      {"k sweep", k_sweep},
      {"matrix-mode comparison", matrix_modes},
      {"determinism", determinism},
      {"KRR baseline", krr_baseline},
      {"checkpoint round-trip", checkpoint_roundtrip},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  [" << fmt(seconds_since(t0), 3) << "s]  "
              << o.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
