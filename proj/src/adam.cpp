#include "smith/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace smith {

void adam_step(ParameterStore& store, AdamState& state, const AdamConfig& config) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double warmup =
      config.warmup_steps > 0 ? std::min(1.0, t / static_cast<double>(config.warmup_steps)) : 1.0;
  const double lr = config.lr * warmup;
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  for (auto& p : store.all()) {
    if (!p->grad.allFinite())
      throw std::runtime_error("non-finite gradient for parameter " + p->name);
    p->adam_m = config.beta1 * p->adam_m + (1.0 - config.beta1) * p->grad;
    p->adam_v = config.beta2 * p->adam_v.array() +
                (1.0 - config.beta2) * p->grad.array().square();
    Mat m_hat = p->adam_m / bc1;
    Mat v_hat = p->adam_v / bc2;
    p->value.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + config.eps);
    p->grad.setZero();
  }
}

}  // namespace smith
