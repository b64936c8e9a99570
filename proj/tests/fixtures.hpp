#pragma once

// Small synthetic sessions and short schedules shared by the slower tests.

#include "emgkin/evaluation.hpp"
#include "emgkin/synth.hpp"

namespace emgkin::test {

inline SemgRecording short_session(Protocol p = Protocol::P1, double seconds = 12.0,
                                   std::uint64_t seed = 4) {
  SynthConfig c;
  c.protocol = p;
  c.duration_s = seconds;
  c.seed = seed;
  return generate(c);
}

inline TrainingConfig quick_config(std::size_t cnn_epochs = 2, std::size_t lstm_epochs = 3) {
  TrainingConfig c = TrainingConfig::desk();
  c.cnn.epochs = cnn_epochs;
  c.lstm.epochs = lstm_epochs;
  return c;
}

}  // namespace emgkin::test
