#pragma once

// Fixed-step RK4 rollouts of oracle and learned models.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffnea/actuators.hpp"
#include "diffnea/dynamics.hpp"
#include "diffnea/model.hpp"
#include "diffnea/systems.hpp"

namespace diffnea {

inline constexpr double kDefaultDt = 1.0 / 250.0;
inline constexpr double kDivergenceBound = 1e3;

struct State {
  std::vector<double> q;
  std::vector<double> qd;
};

/// Continuous-time model q'' = f(q, q', tau_d).
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;
  virtual std::size_t dof() const = 0;
  virtual std::vector<double> accel(std::span<const double> q, std::span<const double> qd,
                                    std::span<const double> tau_d) const = 0;
  /// Total energy where the model defines one.
  virtual std::optional<Energy<double>> energy(std::span<const double> q, std::span<const double> qd) const {
    (void)q;
    (void)qd;
    return std::nullopt;
  }
};

/// The closed-form plant.
class PlantModel final : public DynamicsModel {
 public:
  explicit PlantModel(Plant plant) : plant_(std::move(plant)) {}
  std::size_t dof() const override { return plant_.dof(); }
  std::vector<double> accel(std::span<const double> q, std::span<const double> qd,
                            std::span<const double> tau_d) const override;
  std::optional<Energy<double>> energy(std::span<const double> q, std::span<const double> qd) const override {
    return plant_.energy(q, qd);
  }
  const Plant& plant() const noexcept { return plant_; }

 private:
  Plant plant_;
};

/// Rigid-body tree (virtual parameters) followed by an actuator model.
class TreeModel final : public DynamicsModel {
 public:
  TreeModel(KinematicTree tree, std::vector<double> values, TreeParamLayout layout, ActuatorModel actuator);
  std::size_t dof() const override { return tree_.dof(); }
  std::vector<double> accel(std::span<const double> q, std::span<const double> qd,
                            std::span<const double> tau_d) const override;
  std::optional<Energy<double>> energy(std::span<const double> q, std::span<const double> qd) const override;
  const RealizedTree<double>& realized() const noexcept { return realized_; }

 private:
  KinematicTree tree_;
  std::vector<double> values_;
  ActuatorModel actuator_;
  RealizedTree<double> realized_;
};

/// Arbitrary acceleration function, for tests and experiments.
class FunctionModel final : public DynamicsModel {
 public:
  using Fn = std::function<std::vector<double>(std::span<const double>, std::span<const double>,
                                               std::span<const double>)>;
  FunctionModel(std::size_t dof, Fn fn) : dof_(dof), fn_(std::move(fn)) {}
  std::size_t dof() const override { return dof_; }
  std::vector<double> accel(std::span<const double> q, std::span<const double> qd,
                            std::span<const double> tau_d) const override {
    return fn_(q, qd, tau_d);
  }

 private:
  std::size_t dof_;
  Fn fn_;
};

/// f(t, q, q', tau) -> q''.
using AccelFn = std::function<std::vector<double>(double, std::span<const double>, std::span<const double>,
                                                  std::span<const double>)>;

/// One classical RK4 step of (q, q') with tau held constant over the step.
/// Returns std::nullopt when any stage produces a non-finite value.
std::optional<State> rk4_step(const AccelFn& f, double t, const State& state, std::span<const double> tau,
                              double dt);
std::optional<State> rk4_step(const DynamicsModel& model, const State& state, std::span<const double> tau,
                              double dt);

/// tau_d as a function of time and the current state.
using Controller = std::function<std::vector<double>(double, const State&)>;

Controller zero_torque(std::size_t dof);
/// Replays per-step torques; zero beyond the end of the schedule.
Controller torque_schedule(std::vector<std::vector<double>> taus, double dt);

struct RolloutOptions {
  double dt = kDefaultDt;
  double bound = kDivergenceBound;
};

struct Trajectory {
  double dt = kDefaultDt;
  std::vector<State> states;                // states[k] at t = k dt
  std::vector<std::vector<double>> tau;     // input held over [t_k, t_k + dt)
  std::vector<Energy<double>> energy;       // empty if the model has no energy
  bool diverged = false;
  std::ptrdiff_t divergence_step = -1;

  std::size_t size() const noexcept { return states.size(); }
  bool has_energy() const noexcept { return !energy.empty(); }
};

/// Integrates from `initial` for `duration` seconds; stops early (and sets
/// the divergence flag) when a state component leaves [-bound, bound] or
/// becomes non-finite.
Trajectory rollout(const DynamicsModel& model, const State& initial, const Controller& controller, double duration,
                   const RolloutOptions& options = {});

struct TrajectoryMetrics {
  std::vector<double> rmse;     // per coordinate: q..., qd...
  std::size_t overlap = 0;      // compared steps
  std::size_t horizon = 0;      // first step whose max state error exceeds the threshold (= overlap if never)
  double horizon_seconds = 0.0;
  std::optional<double> final_energy_gap;  // |E_a - E_b| at the last compared step
};

TrajectoryMetrics compare(const Trajectory& a, const Trajectory& b, double threshold = 0.1);
nlohmann::json to_json(const TrajectoryMetrics& m);

/// Columns t, q..., qd..., tau..., E_kin, E_pot, diverged.
void write_csv(const Trajectory& traj, const std::filesystem::path& path);
/// Joint positions over time as a static SVG line plot.
void write_svg(const Trajectory& traj, const std::filesystem::path& path, const std::string& title);

}  // namespace diffnea
