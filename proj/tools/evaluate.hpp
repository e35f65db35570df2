#pragma once

// Zero-torque rollout of a fitted model next to the plant, with the energy
// verdict used by `rollout` and `eval`.

#include <string>

#include <nlohmann/json.hpp>

#include "diffnea/ident.hpp"
#include "diffnea/sim.hpp"
#include "diffnea/systems.hpp"

namespace diffnea::cli {

struct RolloutSpec {
  State start;
  double duration = 10.0;
  double dt = kDefaultDt;
  double threshold = 0.1;
  /// Relative energy rise (over |E_kin(0)| + |E_pot(0)|) counted as a gain.
  double tolerance = 1e-3;
};

/// Pendulum hanging, small pendulum velocity.
State default_start(std::size_t dof, double qd_pendulum = 0.01);

struct RolloutEval {
  Trajectory model;
  Trajectory plant;
  TrajectoryMetrics metrics;
  std::string energy_class;
  double max_rise = 0.0;  // +inf when the rollout diverged
  bool gained = false;
  /// "ok", "energy gain", "diverged"; VIOLATION when a conserving or
  /// bounded model gains energy or diverges.
  std::string verdict;

  nlohmann::json to_json() const;
};

/// Plant recorded in the fit (the data's generating plant), else the fit's
/// tree system.
Plant plant_for(const FitResult& fit);

RolloutEval evaluate_rollout(const FitResult& fit, const Plant& plant, const RolloutSpec& spec);

}  // namespace diffnea::cli
