#include "diffnea/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace diffnea {

void AdamConfig::validate() const {
  if (!(step_size > 0.0)) throw std::invalid_argument("ADAM step size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("ADAM betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("ADAM epsilon must be positive");
}

nlohmann::json to_json(const AdamConfig& cfg) {
  return {{"step_size", cfg.step_size}, {"beta1", cfg.beta1}, {"beta2", cfg.beta2}, {"epsilon", cfg.epsilon}};
}

AdamConfig adam_config_from_json(const nlohmann::json& doc) {
  AdamConfig cfg;
  cfg.step_size = doc.value("step_size", cfg.step_size);
  cfg.beta1 = doc.value("beta1", cfg.beta1);
  cfg.beta2 = doc.value("beta2", cfg.beta2);
  cfg.epsilon = doc.value("epsilon", cfg.epsilon);
  cfg.validate();
  return cfg;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg,
               std::span<const bool> mask, double step_size) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("ADAM state does not match the parameter count");
  }
  if (!mask.empty() && mask.size() != params.size()) throw std::invalid_argument("ADAM mask size mismatch");
  const double lr = step_size > 0.0 ? step_size : cfg.step_size;
  ++state.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

}  // namespace diffnea
