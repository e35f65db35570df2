#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace diffnea {

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  /// Throws std::invalid_argument unless step_size > 0 and 0 <= beta < 1.
  void validate() const;
};

nlohmann::json to_json(const AdamConfig& cfg);
AdamConfig adam_config_from_json(const nlohmann::json& doc);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected ADAM update of `params` in place. Entries whose mask
/// bit is false are left untouched (an empty mask updates everything).
/// `step_size` overrides cfg.step_size when positive (learning-rate schedules).
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg,
               std::span<const bool> mask = {}, double step_size = 0.0);

}  // namespace diffnea
