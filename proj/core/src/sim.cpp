#include "diffnea/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace diffnea {

std::vector<double> PlantModel::accel(std::span<const double> q, std::span<const double> qd,
                                      std::span<const double> tau_d) const {
  const auto a = plant_.accel(q, qd, tau_d);
  return {a.begin(), a.end()};
}

TreeModel::TreeModel(KinematicTree tree, std::vector<double> values, TreeParamLayout layout, ActuatorModel actuator)
    : tree_(std::move(tree)), values_(std::move(values)), actuator_(std::move(actuator)) {
  realized_ = realize_tree<double>(tree_, std::span<const double>(values_), layout);
}

std::vector<double> TreeModel::accel(std::span<const double> q, std::span<const double> qd,
                                     std::span<const double> tau_d) const {
  const std::vector<double> tau = actuator_.apply<double>(values_, tau_d, q, qd);
  return aba_forward<double>(realized_, q, qd, tau).qdd;
}

std::optional<Energy<double>> TreeModel::energy(std::span<const double> q, std::span<const double> qd) const {
  return total_energy<double>(realized_, q, qd);
}

namespace {

bool finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

std::optional<State> rk4_step(const AccelFn& f, double t, const State& s, std::span<const double> tau, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step needs dt > 0");
  const std::size_t n = s.q.size();
  std::vector<double> q(n), qd(n);
  auto stage = [&](const std::vector<double>* dq, const std::vector<double>* dqd, double h, double ts) {
    for (std::size_t i = 0; i < n; ++i) {
      q[i] = s.q[i] + (dq != nullptr ? h * (*dq)[i] : 0.0);
      qd[i] = s.qd[i] + (dqd != nullptr ? h * (*dqd)[i] : 0.0);
    }
    return f(ts, q, qd, tau);
  };
  // k_i = (velocity, acceleration) at stage i.
  const std::vector<double> v1 = s.qd;
  const std::vector<double> a1 = stage(nullptr, nullptr, 0.0, t);
  if (a1.size() != n || !finite(a1)) return std::nullopt;
  const std::vector<double> a2 = stage(&v1, &a1, 0.5 * dt, t + 0.5 * dt);
  const std::vector<double> v2 = qd;
  if (!finite(a2)) return std::nullopt;
  const std::vector<double> a3 = stage(&v2, &a2, 0.5 * dt, t + 0.5 * dt);
  const std::vector<double> v3 = qd;
  if (!finite(a3)) return std::nullopt;
  const std::vector<double> a4 = stage(&v3, &a3, dt, t + dt);
  const std::vector<double> v4 = qd;
  if (!finite(a4)) return std::nullopt;

  State out{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.q[i] = s.q[i] + dt / 6.0 * (v1[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
    out.qd[i] = s.qd[i] + dt / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
  }
  if (!finite(out.q) || !finite(out.qd)) return std::nullopt;
  return out;
}

std::optional<State> rk4_step(const DynamicsModel& model, const State& state, std::span<const double> tau,
                              double dt) {
  const AccelFn f = [&model](double, std::span<const double> q, std::span<const double> qd,
                             std::span<const double> u) { return model.accel(q, qd, u); };
  return rk4_step(f, 0.0, state, tau, dt);
}

Controller zero_torque(std::size_t dof) {
  return [dof](double, const State&) { return std::vector<double>(dof, 0.0); };
}

Controller torque_schedule(std::vector<std::vector<double>> taus, double dt) {
  return [taus = std::move(taus), dt](double t, const State& s) {
    const auto k = static_cast<std::size_t>(std::llround(t / dt));
    if (k < taus.size()) return taus[k];
    return std::vector<double>(s.q.size(), 0.0);
  };
}

Trajectory rollout(const DynamicsModel& model, const State& initial, const Controller& controller, double duration,
                   const RolloutOptions& options) {
  if (!(duration > 0.0)) throw std::invalid_argument("rollout duration must be positive");
  if (initial.q.size() != model.dof() || initial.qd.size() != model.dof()) {
    throw std::invalid_argument("initial state does not match model dof");
  }
  Trajectory traj;
  traj.dt = options.dt;
  const auto steps = static_cast<std::size_t>(std::llround(duration / options.dt));
  traj.states.reserve(steps + 1);
  traj.tau.reserve(steps + 1);

  auto out_of_bounds = [&](const State& s) {
    for (const auto* v : {&s.q, &s.qd}) {
      for (const double x : *v) {
        if (!std::isfinite(x) || std::abs(x) > options.bound) return true;
      }
    }
    return false;
  };
  auto record = [&](const State& s, double t) {
    traj.states.push_back(s);
    traj.tau.push_back(controller(t, s));
    if (const auto e = model.energy(s.q, s.qd)) traj.energy.push_back(*e);
  };

  record(initial, 0.0);
  if (out_of_bounds(initial)) {
    traj.diverged = true;
    traj.divergence_step = 0;
    return traj;
  }
  const AccelFn f = [&model](double, std::span<const double> q, std::span<const double> qd,
                             std::span<const double> u) { return model.accel(q, qd, u); };
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * options.dt;
    std::optional<State> next;
    try {
      next = rk4_step(f, t, traj.states.back(), traj.tau.back(), options.dt);
    } catch (const std::domain_error&) {
      next.reset();
    } catch (const SingularInertiaError&) {
      next.reset();
    }
    if (!next || out_of_bounds(*next)) {
      traj.diverged = true;
      traj.divergence_step = static_cast<std::ptrdiff_t>(k + 1);
      break;
    }
    record(*next, t + options.dt);
  }
  if (traj.energy.size() != traj.states.size()) traj.energy.clear();
  return traj;
}

TrajectoryMetrics compare(const Trajectory& a, const Trajectory& b, double threshold) {
  if (std::abs(a.dt - b.dt) > 1e-15 * std::max(1.0, std::abs(a.dt))) {
    throw std::invalid_argument("cannot compare trajectories with different dt");
  }
  TrajectoryMetrics m;
  m.overlap = std::min(a.size(), b.size());
  const std::size_t dof = a.states.empty() ? 0 : a.states.front().q.size();
  m.rmse.assign(2 * dof, 0.0);
  m.horizon = m.overlap;
  if (m.overlap == 0) return m;
  for (std::size_t k = 0; k < m.overlap; ++k) {
    double worst = 0.0;
    for (std::size_t i = 0; i < dof; ++i) {
      const double eq = a.states[k].q[i] - b.states[k].q[i];
      const double ev = a.states[k].qd[i] - b.states[k].qd[i];
      m.rmse[i] += eq * eq;
      m.rmse[dof + i] += ev * ev;
      worst = std::max({worst, std::abs(eq), std::abs(ev)});
    }
    if (worst > threshold && m.horizon == m.overlap) m.horizon = k;
  }
  for (double& r : m.rmse) r = std::sqrt(r / static_cast<double>(m.overlap));
  m.horizon_seconds = static_cast<double>(m.horizon) * a.dt;
  if (a.has_energy() && b.has_energy()) {
    m.final_energy_gap = std::abs(a.energy[m.overlap - 1].total() - b.energy[m.overlap - 1].total());
  }
  return m;
}

nlohmann::json to_json(const TrajectoryMetrics& m) {
  nlohmann::json j = {{"rmse", m.rmse},
                      {"overlap", m.overlap},
                      {"horizon", m.horizon},
                      {"horizon_seconds", m.horizon_seconds}};
  j["final_energy_gap"] = m.final_energy_gap ? nlohmann::json(*m.final_energy_gap) : nlohmann::json(nullptr);
  return j;
}

void write_csv(const Trajectory& traj, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const std::size_t dof = traj.states.empty() ? 0 : traj.states.front().q.size();
  out << "t";
  for (std::size_t i = 0; i < dof; ++i) out << ",q" << i;
  for (std::size_t i = 0; i < dof; ++i) out << ",qd" << i;
  for (std::size_t i = 0; i < dof; ++i) out << ",tau" << i;
  out << ",E_kin,E_pot,diverged\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << fmt::format("{:.17g}", static_cast<double>(k) * traj.dt);
    for (const double x : traj.states[k].q) out << fmt::format(",{:.17g}", x);
    for (const double x : traj.states[k].qd) out << fmt::format(",{:.17g}", x);
    for (const double x : traj.tau[k]) out << fmt::format(",{:.17g}", x);
    if (traj.has_energy()) {
      out << fmt::format(",{:.17g},{:.17g}", traj.energy[k].kinetic, traj.energy[k].potential);
    } else {
      out << ",,";
    }
    const bool last = k + 1 == traj.size();
    out << ',' << ((traj.diverged && last) ? 1 : 0) << '\n';
  }
}

void write_svg(const Trajectory& traj, const std::filesystem::path& path, const std::string& title) {
  constexpr double kWidth = 640.0;
  constexpr double kHeight = 320.0;
  constexpr double kMargin = 40.0;
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

  const std::size_t dof = traj.states.empty() ? 0 : traj.states.front().q.size();
  double lo = 0.0;
  double hi = 0.0;
  for (const State& s : traj.states) {
    for (const double x : s.q) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double t_end = std::max(traj.dt, static_cast<double>(traj.size() > 0 ? traj.size() - 1 : 0) * traj.dt);

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}">)", kWidth, kHeight) << '\n';
  out << fmt::format(R"(<rect width="100%" height="100%" fill="white"/>)") << '\n';
  out << fmt::format(R"(<text x="{}" y="20" font-family="sans-serif" font-size="13">{}</text>)", kMargin, title)
      << '\n';
  out << fmt::format(R"(<rect x="{0}" y="{0}" width="{1}" height="{2}" fill="none" stroke="#888"/>)", kMargin,
                     kWidth - 2 * kMargin, kHeight - 2 * kMargin)
      << '\n';
  for (std::size_t i = 0; i < dof; ++i) {
    out << fmt::format(R"(<polyline fill="none" stroke="{}" stroke-width="1.2" points=")", kColors[i % 4]);
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double x = kMargin + (kWidth - 2 * kMargin) * (static_cast<double>(k) * traj.dt / t_end);
      const double y = kHeight - kMargin - (kHeight - 2 * kMargin) * (traj.states[k].q[i] - lo) / (hi - lo);
      out << fmt::format("{:.2f},{:.2f} ", x, y);
    }
    out << "\"/>\n";
    out << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{}">q{}</text>)",
                       kWidth - kMargin + 4, kMargin + 14.0 * static_cast<double>(i + 1), kColors[i % 4], i)
        << '\n';
  }
  if (traj.diverged) {
    out << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="#d62728">diverged at step {}</text>)",
                       kMargin, kHeight - 12, traj.divergence_step)
        << '\n';
  }
  out << "</svg>\n";
}

}  // namespace diffnea
