#pragma once

#include "smith/params.hpp"

namespace smith {

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  int warmup_steps = 0;  // linear warmup multiplier min(1, step/warmup)
};

struct AdamState {
  long step = 0;
};

// Bias-corrected Adam update over every parameter in the store. Consumes and
// zeroes the accumulated gradients. Throws, naming the parameter, if a
// gradient is non-finite.
void adam_step(ParameterStore& store, AdamState& state, const AdamConfig& config);

}  // namespace smith
