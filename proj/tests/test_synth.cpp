#include <doctest.h>

#include <numbers>

#include "emgkin/synth.hpp"

using namespace emgkin;

namespace {

SynthConfig short_config(Protocol p, std::uint64_t seed = 3) {
  SynthConfig c;
  c.protocol = p;
  c.duration_s = 20.0;
  c.seed = seed;
  return c;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("single-DoF protocols move only their DoF") {
  const auto rec = generate(short_config(Protocol::P1));
  CHECK(rec.dof_count() == 1);
  CHECK(rec.channels() == 6);
  CHECK(rec.fs_emg == 1024.0);
  CHECK(rec.fs_ang == 100.0);
  CHECK(rec.emg_samples() == 20 * 1024);
  CHECK(rec.angle_samples() == 20 * 100);
  CHECK_NOTHROW(validate(rec));
  double peak = 0.0;
  for (double a : rec.angles.data()) peak = std::max(peak, std::abs(a));
  CHECK(peak > 50.0);
  CHECK(peak <= 60.0);
  CHECK(generate(short_config(Protocol::P4)).dof_count() == 3);
}

TEST_CASE("generation is deterministic in the seed") {
  const auto a = generate(short_config(Protocol::P2, 5));
  const auto b = generate(short_config(Protocol::P2, 5));
  const auto c = generate(short_config(Protocol::P2, 6));
  CHECK(a.emg == b.emg);
  CHECK(a.angles == b.angles);
  CHECK_FALSE(a.emg == c.emg);
}

TEST_CASE("angles are bounded and periodic") {
  SynthConfig c = short_config(Protocol::P4);
  for (double t = 0.0; t < 20.0; t += 0.37) {
    const auto now = synth_angles(c, t);
    const auto later = synth_angles(c, t + 10.0);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(std::abs(now[j]) <= c.amplitude_deg[j]);
      CHECK(std::abs(now[j] - later[j]) < 1e-9);
    }
  }
  // P4 DoFs are out of phase.
  const auto a = synth_angles(c, 0.0);
  CHECK(a[0] == 0.0);
  CHECK(a[1] != 0.0);
}

TEST_CASE("channel envelopes follow the drive") {
  for (Protocol p : {Protocol::P1, Protocol::P4}) {
    SynthConfig c = short_config(p);
    const auto rec = generate(c);
    const Tensor64 gain = default_gain(p);
    const std::size_t block = 256;  // 250 ms smoothing of |emg|
    for (std::size_t n = 0; n < 6; ++n) {
      std::vector<double> env, drive;
      for (std::size_t s = 0; s + block <= rec.emg_samples(); s += block) {
        double acc = 0.0;
        for (std::size_t i = s; i < s + block; ++i) acc += std::abs(rec.emg(i, n));
        env.push_back(acc / block);
        drive.push_back(channel_drive(c, gain, rec.emg_time(s + block / 2))[n]);
      }
      CHECK_MESSAGE(correlation(env, drive) > 0.8, "channel " << n);
    }
  }
}

TEST_CASE("P-S has the weakest default gain in P4") {
  const Tensor64 g = default_gain(Protocol::P4);
  double fe = 0, ps = 0, ru = 0;
  for (std::size_t n = 0; n < 6; ++n) {
    CHECK(g(n, 0) >= 0.0);
    fe += g(n, 0);
    ps += g(n, 1);
    ru += g(n, 2);
  }
  CHECK(ps < fe);
  CHECK(ps < ru);
}

TEST_CASE("session pairs differ but share the protocol") {
  const auto [a, b] = generate_session_pair(short_config(Protocol::P1, 9));
  CHECK_FALSE(a.emg == b.emg);
  CHECK(a.protocol == b.protocol);
  CHECK(a.session_id != b.session_id);
  CHECK_NOTHROW(validate(b));
}

TEST_CASE("invalid configs are rejected") {
  SynthConfig c;
  c.contraction_hz = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SynthConfig{};
  c.gain = Tensor64({6, 3}, 1.0);  // P1 needs one column
  CHECK_THROWS_AS(generate(c), ConfigError);
  c.gain = Tensor64({6, 1}, -1.0);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SynthConfig{};
  c.channels = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
