#pragma once

// Reverse-mode gradients of a forward-dynamics loss against a five-point
// finite-difference stencil, for every virtual parameter of a tree and
// actuator.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffnea/actuators.hpp"
#include "diffnea/systems.hpp"

namespace diffnea {

struct GradcheckConfig {
  std::vector<SystemKind> systems = {SystemKind::kCartpole, SystemKind::kFuruta};
  std::vector<ActuatorKind> actuators = {ActuatorKind::kNone,       ActuatorKind::kViscous,
                                         ActuatorKind::kStribeck,   ActuatorKind::kNNFriction,
                                         ActuatorKind::kNNResidual, ActuatorKind::kFFNN};
  std::size_t states = 100;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  /// Relative step, scaled by max(0.1, |theta|).
  double step = 1e-3;
  /// Denominator floor relative to the largest gradient entry of the state;
  /// entries below it are compared in absolute terms.
  double floor = 1e-6;
  std::vector<std::size_t> hidden = {32, 32};
};

struct GradcheckCase {
  SystemKind system;
  ActuatorKind actuator;
  std::size_t params = 0;
  std::size_t states = 0;
  std::size_t failures = 0;
  double max_rel_error = 0.0;
  std::string worst_param;
  double seconds = 0.0;

  bool passed() const noexcept { return failures == 0; }
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;
  double tolerance = 0.0;
  double seconds = 0.0;

  bool passed() const noexcept;
  nlohmann::json to_json() const;
};

/// Loss per state: w . qdd with random fixed weights, all tree parameters
/// (kinematic and inertial) and actuator parameters learnable. Parameters
/// are the priors perturbed by up to 5 % per state.
GradcheckReport run_gradcheck(const GradcheckConfig& cfg = {});

}  // namespace diffnea
