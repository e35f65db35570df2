#include "diffnea/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "diffnea/data.hpp"
#include "diffnea/dynamics.hpp"
#include "diffnea/model.hpp"
#include "diffnea/param_set.hpp"

namespace diffnea {

namespace {

template <class T>
T loss_of(const KinematicTree& tree, const TreeParamLayout& layout, const ActuatorModel& act,
          std::span<const T> p, const Sample& s, std::span<const double> w) {
  const std::vector<T> q(s.q.begin(), s.q.end());
  const std::vector<T> qd(s.qd.begin(), s.qd.end());
  const std::vector<T> tau_d(s.tau.begin(), s.tau.end());
  const RealizedTree<T> realized = realize_tree<T>(tree, p, layout);
  const std::vector<T> tau = act.apply<T>(p, tau_d, q, qd);
  const std::vector<T> qdd = aba_forward<T>(realized, q, qd, tau).qdd;
  T loss = T(0.0);
  for (std::size_t j = 0; j < qdd.size(); ++j) loss += qdd[j] * w[j];
  return loss;
}

// The friction magnitude |f_NN| has a kink at zero; a stencil straddling it
// measures a one-sided slope. Such draws are skipped.
bool near_kink(const ActuatorModel& act, std::span<const double> p, const Sample& s) {
  if (act.kind() != ActuatorKind::kNNFriction) return false;
  for (std::size_t j = 0; j < s.q.size(); ++j) {
    const double zero = 0.0;
    const double qd = s.qd[j] == 0.0 ? 1.0 : s.qd[j];
    const double mag = std::abs(act.apply_joint<double>(p, j, zero, s.q[j], qd));
    if (mag < 1e-2) return true;
  }
  return false;
}

GradcheckCase check_case(SystemKind system, ActuatorKind kind, const GradcheckConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const Plant plant = Plant::make(system);
  const KinematicTree tree = plant.tree();
  ParamSet params;
  const TreeParamLayout layout = add_tree_params(tree, params);
  std::vector<std::string> names;
  std::vector<bool> revolute;
  for (const Link& l : tree.links()) {
    names.push_back(l.name);
    revolute.push_back(l.joint == JointType::kRevolute);
  }
  ActuatorConfig acfg;
  acfg.kind = kind;
  acfg.hidden = cfg.hidden;
  ActuatorModel act(acfg, names, revolute);
  act.append_params(params, cfg.seed);
  const std::vector<double> base(params.values().begin(), params.values().end());
  const std::size_t n = base.size();

  GradcheckCase out;
  out.system = system;
  out.actuator = kind;
  out.params = n;
  out.states = cfg.states;
  std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(system) * 16 + static_cast<std::uint64_t>(kind)));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const UniformRanges ranges = UniformRanges::defaults(system);
  const std::size_t dof = tree.dof();

  std::vector<double> p(n), g_ad(n), adj;
  for (std::size_t k = 0; k < cfg.states; ++k) {
    Sample s;
    s.q.resize(dof);
    s.qd.resize(dof);
    s.tau.resize(dof);
    std::vector<double> w(dof);
    for (std::size_t j = 0; j < dof; ++j) {
      auto draw = [&](double lo, double hi) { return lo + (hi - lo) * 0.5 * (unit(rng) + 1.0); };
      s.q[j] = draw(ranges.q_lo[j], ranges.q_hi[j]);
      s.qd[j] = draw(ranges.qd_lo[j], ranges.qd_hi[j]);
      s.tau[j] = draw(-1.0, 1.0);
      w[j] = unit(rng);
    }
    for (std::size_t i = 0; i < n; ++i) p[i] = base[i] * (1.0 + 0.05 * unit(rng)) + 0.01 * unit(rng);
    if (near_kink(act, p, s)) {
      --k;
      continue;
    }

    Tape& tape = Tape::active();
    tape.clear();
    std::vector<DiffScalar> leaves(n);
    for (std::size_t i = 0; i < n; ++i) leaves[i] = DiffScalar::variable(p[i]);
    const DiffScalar loss = loss_of<DiffScalar>(tree, layout, act, std::span<const DiffScalar>(leaves), s, w);
    adj.assign(tape.size(), 0.0);
    if (!loss.is_constant()) adj[static_cast<std::size_t>(loss.id())] = 1.0;
    tape.propagate(adj, tape.size(), 0);
    for (std::size_t i = 0; i < n; ++i) g_ad[i] = adj[static_cast<std::size_t>(leaves[i].id())];
    tape.clear();

    double g_max = 0.0;
    for (const double g : g_ad) g_max = std::max(g_max, std::abs(g));
    for (std::size_t i = 0; i < n; ++i) {
      const double h = cfg.step * std::max(1e-1, std::abs(p[i]));
      auto at = [&](double delta) {
        std::vector<double> x = p;
        x[i] += delta;
        return loss_of<double>(tree, layout, act, std::span<const double>(x), s, w);
      };
      const double g_fd = (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h);
      const double denom = std::max({std::abs(g_fd), std::abs(g_ad[i]), cfg.floor * g_max});
      const double err = std::abs(g_ad[i] - g_fd) / denom;
      if (!(err < cfg.tolerance)) ++out.failures;
      if (!(err <= out.max_rel_error)) {
        out.max_rel_error = err;
        out.worst_param = params.name(i);
      }
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace

bool GradcheckReport::passed() const noexcept {
  return !cases.empty() && std::all_of(cases.begin(), cases.end(), [](const GradcheckCase& c) { return c.passed(); });
}

nlohmann::json GradcheckReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const GradcheckCase& c : cases) {
    arr.push_back({{"system", std::string(to_string(c.system))},
                   {"actuator", std::string(to_string(c.actuator))},
                   {"params", c.params},
                   {"states", c.states},
                   {"failures", c.failures},
                   {"max_rel_error", c.max_rel_error},
                   {"worst_param", c.worst_param},
                   {"seconds", c.seconds}});
  }
  return {{"passed", passed()}, {"tolerance", tolerance}, {"seconds", seconds}, {"cases", arr}};
}

GradcheckReport run_gradcheck(const GradcheckConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckReport report;
  report.tolerance = cfg.tolerance;
  for (const SystemKind s : cfg.systems) {
    for (const ActuatorKind a : cfg.actuators) report.cases.push_back(check_case(s, a, cfg));
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace diffnea
