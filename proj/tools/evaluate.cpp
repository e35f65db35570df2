#include "evaluate.hpp"

#include <cmath>
#include <limits>

#include "common.hpp"

namespace diffnea::cli {

State default_start(std::size_t dof, double qd_pendulum) {
  State s{std::vector<double>(dof, 0.0), std::vector<double>(dof, 0.0)};
  if (dof > 1) s.qd[1] = qd_pendulum;
  return s;
}

Plant plant_for(const FitResult& fit) {
  if (!fit.plant.is_null()) return Plant::from_json(fit.plant);
  if (fit.tree.is_object() && fit.tree.contains("system")) return Plant::from_json(fit.tree);
  throw UsageError("the fit records no generating plant to compare against");
}

RolloutEval evaluate_rollout(const FitResult& fit, const Plant& plant, const RolloutSpec& spec) {
  const auto model = make_model(fit);
  if (model->dof() != plant.dof() || spec.start.q.size() != plant.dof() || spec.start.qd.size() != plant.dof()) {
    throw UsageError("start state, model and plant disagree on the number of joints");
  }
  const RolloutOptions opt{spec.dt, kDivergenceBound};
  RolloutEval r;
  r.model = rollout(*model, spec.start, zero_torque(model->dof()), spec.duration, opt);
  r.plant = rollout(PlantModel(plant), spec.start, zero_torque(plant.dof()), spec.duration, opt);
  r.metrics = compare(r.plant, r.model, spec.threshold);
  r.energy_class = energy_class(to_json(fit.config));

  if (r.model.diverged) {
    r.max_rise = std::numeric_limits<double>::infinity();
  } else if (r.model.has_energy()) {
    const auto& e0 = r.model.energy.front();
    const double scale = std::abs(e0.kinetic) + std::abs(e0.potential);
    for (const auto& e : r.model.energy) r.max_rise = std::max(r.max_rise, (e.total() - e0.total()) / scale);
  }
  r.gained = r.model.diverged || r.max_rise > spec.tolerance;
  r.verdict = r.model.diverged ? "diverged" : (r.gained ? "energy gain" : "ok");
  if (r.gained && r.energy_class != "unbounded") r.verdict = "VIOLATION (" + r.verdict + ")";
  return r;
}

nlohmann::json RolloutEval::to_json() const {
  nlohmann::json j = diffnea::to_json(metrics);
  j["energy_class"] = energy_class;
  j["max_relative_energy_rise"] = std::isfinite(max_rise) ? nlohmann::json(max_rise) : nlohmann::json(nullptr);
  j["energy_gain"] = gained;
  j["diverged"] = model.diverged;
  j["divergence_step"] = model.divergence_step;
  j["verdict"] = verdict;
  return j;
}

}  // namespace diffnea::cli
