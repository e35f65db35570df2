#include "diffnea/ident.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <thread>

#include <Eigen/QR>

#include "diffnea/dynamics.hpp"
#include "diffnea/errors.hpp"

namespace diffnea {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kDiffNea: return "diffnea";
    case ModelKind::kNoKinDiffNea: return "nokin_diffnea";
    case ModelKind::kNea: return "nea";
    case ModelKind::kFfnn: return "ffnn";
  }
  return "diffnea";
}

ModelKind model_kind_from_string(std::string_view name) {
  for (const ModelKind k : {ModelKind::kDiffNea, ModelKind::kNoKinDiffNea, ModelKind::kNea, ModelKind::kFfnn}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(InitKind kind) { return kind == InitKind::kPrior ? "prior" : "random"; }

InitKind init_kind_from_string(std::string_view name) {
  if (name == "prior") return InitKind::kPrior;
  if (name == "random") return InitKind::kRandom;
  throw std::invalid_argument("unknown initialization '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  adam.validate();
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("validation fraction must lie in [0, 1)");
  }
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw std::invalid_argument("lr_decay must lie in (0, 1]");
  if (restarts == 0) throw std::invalid_argument("restarts must be at least 1");
  if (jobs == 0) throw std::invalid_argument("jobs must be at least 1");
}

nlohmann::json to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["model"] = std::string(to_string(cfg.model));
  j["actuator"] = nlohmann::ordered_json::parse(to_json(cfg.actuator).dump());
  j["init"] = std::string(to_string(cfg.init));
  j["adam"] = nlohmann::ordered_json::parse(to_json(cfg.adam).dump());
  j["lr_decay"] = cfg.lr_decay;
  j["min_step_size"] = cfg.min_step_size;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["validation_fraction"] = cfg.validation_fraction;
  j["restarts"] = cfg.restarts;
  j["target_loss"] = cfg.target_loss;
  j["jobs"] = cfg.jobs;
  j["ffnn_hidden"] = cfg.ffnn_hidden;
  return nlohmann::json::parse(j.dump());
}

TrainConfig train_config_from_json(const nlohmann::json& doc) {
  TrainConfig cfg;
  if (doc.contains("model")) cfg.model = model_kind_from_string(doc["model"].get<std::string>());
  if (doc.contains("actuator")) cfg.actuator = actuator_config_from_json(doc["actuator"]);
  if (doc.contains("init")) cfg.init = init_kind_from_string(doc["init"].get<std::string>());
  if (doc.contains("adam")) cfg.adam = adam_config_from_json(doc["adam"]);
  cfg.lr_decay = doc.value("lr_decay", cfg.lr_decay);
  cfg.min_step_size = doc.value("min_step_size", cfg.min_step_size);
  cfg.batch_size = doc.value("batch_size", cfg.batch_size);
  cfg.epochs = doc.value("epochs", cfg.epochs);
  cfg.seed = doc.value("seed", cfg.seed);
  cfg.validation_fraction = doc.value("validation_fraction", cfg.validation_fraction);
  cfg.restarts = doc.value("restarts", cfg.restarts);
  cfg.target_loss = doc.value("target_loss", cfg.target_loss);
  cfg.jobs = doc.value("jobs", cfg.jobs);
  if (doc.contains("ffnn_hidden")) cfg.ffnn_hidden = doc["ffnn_hidden"].get<std::vector<std::size_t>>();
  cfg.validate();
  return cfg;
}

void randomize_tree_params(std::span<double> values, const TreeParamLayout& layout, std::span<const bool> mask,
                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> positive(0.1, 1.0);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> offset(-0.5, 0.5);
  for (std::size_t i = 0; i < layout.links; ++i) {
    // Draw every value so the stream does not depend on the mask.
    const std::size_t k = layout.kin_offset(i);
    const std::size_t m = layout.inertial_offset(i);
    double draws[kParamsPerLink];
    for (int a = 0; a < 3; ++a) draws[a] = angle(rng);
    for (int a = 3; a < 6; ++a) draws[a] = offset(rng);
    for (int a = 6; a < 10; ++a) draws[a] = positive(rng);
    for (int a = 10; a < 13; ++a) draws[a] = angle(rng);
    for (int a = 13; a < 16; ++a) draws[a] = offset(rng);
    for (std::size_t a = 0; a < kParamsPerLink; ++a) {
      const std::size_t idx = (a < kKinParamsPerLink ? k + a : m + (a - kKinParamsPerLink));
      if (mask.empty() || mask[idx]) values[idx] = draws[a];
    }
  }
}

Split split_indices(std::size_t n, double validation_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(derive_seed(seed, 0x5eed));
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(n)));
  if (validation_fraction > 0.0 && n_val == 0 && n > 1) n_val = 1;
  Split s;
  s.train.assign(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_val));
  s.validation.assign(idx.end() - static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

double forward_mse(const DynamicsModel& model, const Dataset& data, std::span<const std::size_t> indices) {
  double sum = 0.0;
  std::size_t count = 0;
  auto add = [&](const Sample& s) {
    const std::vector<double> a = model.accel(s.q, s.qd, s.tau);
    for (std::size_t j = 0; j < a.size(); ++j) sum += (a[j] - s.qdd[j]) * (a[j] - s.qdd[j]);
    count += a.size();
  };
  if (indices.empty()) {
    for (const Sample& s : data.samples) add(s);
  } else {
    for (const std::size_t i : indices) add(data.samples[i]);
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

GeneralizedInertia<double> inertia_from_standard(std::span<const double> t) {
  GeneralizedInertia<double> g;
  g.mass = t[0];
  g.first_moment = Eigen::Vector3d(t[1], t[2], t[3]);
  g.rotational << t[4], t[5], t[6], t[5], t[7], t[8], t[6], t[8], t[9];
  return g;
}

Eigen::MatrixXd inertial_regressor(const RealizedTree<double>& kinematics, std::span<const double> q,
                                   std::span<const double> qd, std::span<const double> qdd) {
  const std::size_t n = kinematics.dof();
  Eigen::MatrixXd y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(10 * n));
  RealizedTree<double> basis = kinematics;
  for (auto& link : basis.links) link.inertia = GeneralizedInertia<double>{};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < 10; ++k) {
      double theta[10] = {};
      theta[k] = 1.0;
      basis.links[i].inertia = inertia_from_standard(theta);
      const auto tau = rnea_inverse<double>(basis, q, qd, qdd).tau;
      for (std::size_t r = 0; r < n; ++r) y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(10 * i + k)) = tau[r];
    }
    basis.links[i].inertia = GeneralizedInertia<double>{};
  }
  return y;
}

namespace {

// ---------------------------------------------------------------------------
// Objectives: map a parameter vector to per-sample acceleration predictions.

using DoublePredictor = std::function<std::vector<double>(const Sample&)>;
using DiffPredictor = std::function<std::vector<DiffScalar>(const Sample&)>;

class Objective {
 public:
  virtual ~Objective() = default;
  virtual DoublePredictor make_double(std::span<const double> p) const = 0;
  /// May record parameter-only work (the shared region) on the active tape.
  virtual DiffPredictor make_diff(std::span<const DiffScalar> p) const = 0;
};

template <class T>
std::vector<T> as_scalars(const std::vector<double>& v) {
  return std::vector<T>(v.begin(), v.end());
}

class TreeObjective final : public Objective {
 public:
  TreeObjective(const KinematicTree& tree, TreeParamLayout layout, const ActuatorModel& actuator)
      : tree_(tree), layout_(layout), actuator_(actuator) {}

  DoublePredictor make_double(std::span<const double> p) const override {
    auto realized = std::make_shared<RealizedTree<double>>(realize_tree<double>(tree_, p, layout_));
    return [this, realized, p](const Sample& s) {
      const auto tau = actuator_.apply<double>(p, s.tau, s.q, s.qd);
      return aba_forward<double>(*realized, s.q, s.qd, tau).qdd;
    };
  }

  DiffPredictor make_diff(std::span<const DiffScalar> p) const override {
    auto realized = std::make_shared<RealizedTree<DiffScalar>>(realize_tree<DiffScalar>(tree_, p, layout_));
    return [this, realized, p](const Sample& s) {
      const auto q = as_scalars<DiffScalar>(s.q);
      const auto qd = as_scalars<DiffScalar>(s.qd);
      const auto tau_d = as_scalars<DiffScalar>(s.tau);
      const auto tau = actuator_.apply<DiffScalar>(p, tau_d, q, qd);
      return aba_forward<DiffScalar>(*realized, q, qd, tau).qdd;
    };
  }

 private:
  const KinematicTree& tree_;
  TreeParamLayout layout_;
  const ActuatorModel& actuator_;
};

struct Normalization {
  std::vector<double> in_mean, in_std, out_mean, out_std;

  nlohmann::json to_json() const {
    return {{"in_mean", in_mean}, {"in_std", in_std}, {"out_mean", out_mean}, {"out_std", out_std}};
  }
  static Normalization from_json(const nlohmann::json& j) {
    return {j.at("in_mean").get<std::vector<double>>(), j.at("in_std").get<std::vector<double>>(),
            j.at("out_mean").get<std::vector<double>>(), j.at("out_std").get<std::vector<double>>()};
  }
};

template <class T>
std::vector<T> ffnn_predict(const Mlp& mlp, const Normalization& norm, std::span<const T> p, const Sample& s) {
  const std::size_t dof = s.q.size();
  std::vector<T> x(3 * dof);
  for (std::size_t j = 0; j < dof; ++j) {
    x[j] = T((s.q[j] - norm.in_mean[j]) / norm.in_std[j]);
    x[dof + j] = T((s.qd[j] - norm.in_mean[dof + j]) / norm.in_std[dof + j]);
    x[2 * dof + j] = T((s.tau[j] - norm.in_mean[2 * dof + j]) / norm.in_std[2 * dof + j]);
  }
  std::vector<T> y = mlp.forward<T>(p, x);
  for (std::size_t j = 0; j < dof; ++j) y[j] = y[j] * norm.out_std[j] + norm.out_mean[j];
  return y;
}

class FfnnObjective final : public Objective {
 public:
  FfnnObjective(Mlp mlp, Normalization norm) : mlp_(std::move(mlp)), norm_(std::move(norm)) {}

  DoublePredictor make_double(std::span<const double> p) const override {
    return [this, p](const Sample& s) { return ffnn_predict<double>(mlp_, norm_, p, s); };
  }
  DiffPredictor make_diff(std::span<const DiffScalar> p) const override {
    return [this, p](const Sample& s) { return ffnn_predict<DiffScalar>(mlp_, norm_, p, s); };
  }

 private:
  Mlp mlp_;
  Normalization norm_;
};

// ---------------------------------------------------------------------------
// Batch gradients on the thread-local tape.

struct ChunkResult {
  std::vector<double> grad;
  double weighted_loss = 0.0;
  double raw_loss = 0.0;
};

ChunkResult chunk_gradient(const Objective& obj, std::span<const double> values, std::span<const bool> mask,
                           const Dataset& data, std::span<const std::size_t> idx, std::span<const double> weights,
                           double scale) {
  Tape& tape = Tape::active();
  tape.clear();
  std::vector<DiffScalar> leaves(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    leaves[i] = mask[i] ? DiffScalar::variable(values[i]) : DiffScalar(values[i]);
  }
  const DiffPredictor predict = obj.make_diff(leaves);
  const std::size_t mark = tape.size();

  ChunkResult out;
  std::vector<double> adj(mark, 0.0);
  for (const std::size_t k : idx) {
    const Sample& s = data.samples[k];
    const std::vector<DiffScalar> pred = predict(s);
    DiffScalar loss(0.0);
    for (std::size_t j = 0; j < pred.size(); ++j) {
      const DiffScalar e = pred[j] - s.qdd[j];
      loss += (e * e) * weights[j];
      out.raw_loss += (e.value() * e.value());
    }
    out.weighted_loss += loss.value();
    if (!loss.is_constant()) {
      const std::size_t end = tape.size();
      adj.resize(end, 0.0);
      adj[static_cast<std::size_t>(loss.id())] += scale;
      tape.propagate(adj, end, mark);
      adj.resize(mark);
    }
    tape.rewind(mark);
  }
  tape.propagate(adj, mark, 0);
  out.grad.assign(values.size(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!leaves[i].is_constant()) out.grad[i] = adj[static_cast<std::size_t>(leaves[i].id())];
  }
  tape.clear();
  return out;
}

ChunkResult batch_gradient(const Objective& obj, std::span<const double> values, std::span<const bool> mask,
                           const Dataset& data, std::span<const std::size_t> idx, std::span<const double> weights,
                           double scale, std::size_t jobs) {
  jobs = std::max<std::size_t>(1, std::min(jobs, idx.size()));
  if (jobs == 1) return chunk_gradient(obj, values, mask, data, idx, weights, scale);
  std::vector<ChunkResult> parts(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> threads;
  const std::size_t chunk = (idx.size() + jobs - 1) / jobs;
  for (std::size_t t = 0; t < jobs; ++t) {
    const std::size_t lo = std::min(idx.size(), t * chunk);
    const std::size_t hi = std::min(idx.size(), lo + chunk);
    threads.emplace_back([&, t, lo, hi] {
      try {
        parts[t] = chunk_gradient(obj, values, mask, data, idx.subspan(lo, hi - lo), weights, scale);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  ChunkResult out = std::move(parts[0]);
  for (std::size_t t = 1; t < jobs; ++t) {
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += parts[t].grad[i];
    out.weighted_loss += parts[t].weighted_loss;
    out.raw_loss += parts[t].raw_loss;
  }
  return out;
}

double predictor_mse(const Objective& obj, std::span<const double> values, const Dataset& data,
                     std::span<const std::size_t> idx) {
  if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
  const DoublePredictor predict = obj.make_double(values);
  double sum = 0.0;
  std::size_t count = 0;
  for (const std::size_t k : idx) {
    const Sample& s = data.samples[k];
    const auto a = predict(s);
    for (std::size_t j = 0; j < a.size(); ++j) sum += (a[j] - s.qdd[j]) * (a[j] - s.qdd[j]);
    count += a.size();
  }
  return sum / static_cast<double>(count);
}

struct TrainOutcome {
  std::vector<double> best;
  std::vector<double> train_curve;
  std::vector<double> validation_curve;
  double best_validation = std::numeric_limits<double>::infinity();
  double train_mse = 0.0;
  std::size_t best_epoch = 0;
};

TrainOutcome train_adam(const Objective& obj, std::vector<double> values, const std::vector<bool>& mask_vec,
                        const Dataset& data, const Split& split, const TrainConfig& cfg,
                        const std::vector<double>& weights, std::uint64_t seed) {
  const std::unique_ptr<bool[]> mask_buf(new bool[mask_vec.size()]);
  for (std::size_t i = 0; i < mask_vec.size(); ++i) mask_buf[i] = mask_vec[i];
  const std::span<const bool> mask(mask_buf.get(), mask_vec.size());

  TrainOutcome out;
  out.best = values;
  const bool use_validation = !split.validation.empty();
  const auto& checkpoint_set = use_validation ? split.validation : split.train;

  AdamState state(values.size());
  std::mt19937_64 rng(derive_seed(seed, 0xba7c4));
  std::vector<std::size_t> order = split.train;
  const std::size_t dof = data.meta.dof;
  std::size_t batch_index = 0;

  out.best_validation = predictor_mse(obj, values, data, checkpoint_set);
  if (!std::isfinite(out.best_validation)) out.best_validation = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (out.best_validation < cfg.target_loss) break;
    const double lr = std::max(cfg.min_step_size, cfg.adam.step_size * std::pow(cfg.lr_decay, static_cast<double>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double raw_sum = 0.0;
    for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + lo, hi - lo);
      const double scale = 1.0 / static_cast<double>(batch.size() * dof);
      const ChunkResult r = batch_gradient(obj, values, mask, data, batch, weights, scale, cfg.jobs);
      const bool finite_grad = std::all_of(r.grad.begin(), r.grad.end(), [](double g) { return std::isfinite(g); });
      if (!std::isfinite(r.weighted_loss) || !finite_grad) {
        throw NumericAbort(batch_index, values, "epoch " + std::to_string(epoch));
      }
      adam_step(values, r.grad, state, cfg.adam, mask, lr);
      raw_sum += r.raw_loss;
      ++batch_index;
    }
    out.train_curve.push_back(raw_sum / static_cast<double>(order.size() * dof));
    double val = std::numeric_limits<double>::infinity();
    try {
      val = predictor_mse(obj, values, data, checkpoint_set);
    } catch (const SingularInertiaError&) {
    } catch (const DomainError&) {
    }
    if (std::isfinite(val) && val < out.best_validation) {
      out.best_validation = val;
      out.best = values;
      out.best_epoch = epoch + 1;
    }
    out.validation_curve.push_back(out.best_validation);
  }
  out.train_mse = predictor_mse(obj, out.best, data, split.train);
  return out;
}

nlohmann::json dataset_summary(const Dataset& data) {
  return {{"system", data.meta.system},         {"regime", data.meta.regime}, {"seed", data.meta.seed},
          {"n", data.samples.size()},           {"dof", data.meta.dof},       {"dt", data.meta.dt},
          {"state_noise", data.meta.state_noise}, {"action_noise", data.meta.action_noise},
          {"plant_hash", data.meta.plant_hash}};
}

nlohmann::json inertia_report(const std::string& name, double mass, const Eigen::Vector3d& first_moment,
                              const Eigen::Matrix3d& j_origin) {
  Eigen::Vector3d com = Eigen::Vector3d::Zero();
  Eigen::Matrix3d j_com = j_origin;
  if (mass > 0.0) {
    com = first_moment / mass;
    const Eigen::Matrix3d c = skew<double>(com);
    j_com = j_origin + mass * c * c;
  }
  const bool triangle = satisfies_triangle_inequalities(j_com, 1e-9);
  nlohmann::json j;
  j["link"] = name;
  j["mass"] = mass;
  j["com"] = {com(0), com(1), com(2)};
  j["inertia_com"] = {j_com(0, 0), j_com(0, 1), j_com(0, 2), j_com(1, 1), j_com(1, 2), j_com(2, 2)};
  j["plausible"] = {{"mass_nonnegative", mass >= 0.0}, {"triangle_inequalities", triangle}};
  return j;
}

nlohmann::json tree_report(const KinematicTree& tree, std::span<const double> values, const TreeParamLayout& layout) {
  const TreeParams<double> tp = unpack_tree_params<double>(values, layout);
  nlohmann::json links = nlohmann::json::array();
  for (std::size_t i = 0; i < tree.dof(); ++i) {
    const RealizedInertia<double> r = realize_inertia<double>(tp.inertial[i]);
    nlohmann::json j = inertia_report(tree.link(i).name, r.mass, r.com * r.mass, r.rotational);
    j["com"] = {r.com(0), r.com(1), r.com(2)};
    j["principal_moments"] = {r.principal_moments(0), r.principal_moments(1), r.principal_moments(2)};
    j["kin"] = {{"rpy", {tp.kin[i].rpy(0), tp.kin[i].rpy(1), tp.kin[i].rpy(2)}},
                {"xyz", {tp.kin[i].xyz(0), tp.kin[i].xyz(1), tp.kin[i].xyz(2)}}};
    links.push_back(std::move(j));
  }
  return links;
}

std::vector<std::string> standard_param_names(const KinematicTree& tree) {
  std::vector<std::string> names;
  for (const Link& link : tree.links()) {
    for (const char* s : {".m", ".h.x", ".h.y", ".h.z", ".J.xx", ".J.xy", ".J.xz", ".J.yy", ".J.yz", ".J.zz"}) {
      names.push_back(link.name + s);
    }
  }
  return names;
}

std::vector<bool> joint_is_revolute(const KinematicTree& tree) {
  std::vector<bool> out;
  for (const Link& link : tree.links()) out.push_back(link.joint == JointType::kRevolute);
  return out;
}

std::vector<std::string> joint_names(const KinematicTree& tree) {
  std::vector<std::string> out;
  for (const Link& link : tree.links()) out.push_back(link.name);
  return out;
}

void check_data(const Dataset& data, std::size_t dof) {
  if (data.samples.empty()) throw std::invalid_argument("dataset is empty");
  if (data.meta.dof != dof) {
    throw std::invalid_argument("dataset has " + std::to_string(data.meta.dof) + " joints, model has " +
                                std::to_string(dof));
  }
}

/// Rigid-body model with standard (possibly implausible) inertial parameters.
class StandardTreeModel final : public DynamicsModel {
 public:
  StandardTreeModel(const KinematicTree& tree, std::span<const double> theta) : tree_(realize_prior_tree(tree)) {
    for (std::size_t i = 0; i < tree_.dof(); ++i) {
      tree_.links[i].inertia = inertia_from_standard(theta.subspan(10 * i, 10));
    }
  }
  std::size_t dof() const override { return tree_.dof(); }
  std::vector<double> accel(std::span<const double> q, std::span<const double> qd,
                            std::span<const double> tau_d) const override {
    return aba_forward<double>(tree_, q, qd, tau_d).qdd;
  }
  std::optional<Energy<double>> energy(std::span<const double> q, std::span<const double> qd) const override {
    return total_energy<double>(tree_, q, qd);
  }

 private:
  RealizedTree<double> tree_;
};

class FfnnModel final : public DynamicsModel {
 public:
  FfnnModel(Mlp mlp, Normalization norm, std::vector<double> params, std::optional<Plant> plant)
      : mlp_(std::move(mlp)), norm_(std::move(norm)), params_(std::move(params)), plant_(std::move(plant)) {}
  std::size_t dof() const override { return mlp_.output_size(); }
  std::vector<double> accel(std::span<const double> q, std::span<const double> qd,
                            std::span<const double> tau_d) const override {
    Sample s{{q.begin(), q.end()}, {qd.begin(), qd.end()}, {tau_d.begin(), tau_d.end()}, {}};
    return ffnn_predict<double>(mlp_, norm_, params_, s);
  }
  std::optional<Energy<double>> energy(std::span<const double> q, std::span<const double> qd) const override {
    if (!plant_) return std::nullopt;
    return plant_->energy(q, qd);
  }

 private:
  Mlp mlp_;
  Normalization norm_;
  std::vector<double> params_;
  std::optional<Plant> plant_;
};

std::vector<std::size_t> ffnn_layers(std::size_t dof, const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> layers{3 * dof};
  layers.insert(layers.end(), hidden.begin(), hidden.end());
  layers.push_back(dof);
  return layers;
}

}  // namespace

FitResult fit_diffnea(const KinematicTree& tree, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.model != ModelKind::kDiffNea && cfg.model != ModelKind::kNoKinDiffNea) {
    throw std::invalid_argument("fit_diffnea needs model diffnea or nokin_diffnea");
  }
  check_data(data, tree.dof());

  // Known kinematics: freeze every kinematic group.
  std::vector<Link> links = tree.links();
  if (cfg.model == ModelKind::kDiffNea) {
    for (Link& l : links) l.learn_kin = false;
  }
  const KinematicTree model_tree(tree.name(), tree.gravity(), links);

  std::vector<std::string> warnings;
  ParamSet params;
  const TreeParamLayout layout = add_tree_params(model_tree, params, &warnings);
  ActuatorModel actuator(cfg.actuator, joint_names(model_tree), joint_is_revolute(model_tree));

  std::vector<bool> mask;
  for (const Link& l : model_tree.links()) {
    for (std::size_t k = 0; k < kKinParamsPerLink; ++k) mask.push_back(l.learn_kin);
    for (std::size_t k = 0; k < kInertialParamsPerLink; ++k) mask.push_back(l.learn_inertial);
  }

  const Split split = split_indices(data.samples.size(), cfg.validation_fraction, cfg.seed);
  const std::vector<double> weights(tree.dof(), 1.0);

  FitResult result;
  TrainOutcome best;
  std::vector<double> best_initial;
  nlohmann::json restarts = nlohmann::json::array();
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    const std::uint64_t seed = cfg.restarts == 1 ? cfg.seed : derive_seed(cfg.seed, r);
    ParamSet run = params;
    ActuatorModel act = actuator;
    act.append_params(run, derive_seed(seed, 0xac7));
    std::vector<double> values(run.values().begin(), run.values().end());
    std::vector<bool> run_mask = mask;
    run_mask.resize(values.size(), true);
    if (cfg.init == InitKind::kRandom) {
      const std::unique_ptr<bool[]> mb(new bool[run_mask.size()]);
      std::copy(run_mask.begin(), run_mask.end(), mb.get());
      randomize_tree_params(values, layout, std::span<const bool>(mb.get(), run_mask.size()), seed);
    }
    const TreeObjective run_objective(model_tree, layout, act);
    const std::vector<double> initial = values;
    TrainOutcome outcome = train_adam(run_objective, values, run_mask, data, split, cfg, weights, seed);
    restarts.push_back({{"restart", r}, {"seed", seed}, {"validation_mse", outcome.best_validation},
                        {"best_epoch", outcome.best_epoch}});
    if (r == 0 || outcome.best_validation < best.best_validation) {
      best = std::move(outcome);
      best_initial = initial;
      result.param_names = run.names();
    }
  }

  result.config = cfg;
  result.tree = model_tree.to_json();
  result.plant = data.meta.plant;
  result.params = best.best;
  result.initial_params = best_initial;
  result.train_curve = best.train_curve;
  result.validation_curve = best.validation_curve;
  result.validation_mse = best.best_validation;
  result.train_mse = best.train_mse;
  result.best_epoch = best.best_epoch;
  result.dataset = dataset_summary(data);
  ActuatorModel act = actuator;
  act.set_offset(layout.size());
  result.realized = {{"links", tree_report(model_tree, result.params, layout)},
                     {"actuator", act.realized(result.params)}};
  result.extra = {{"restarts", restarts}, {"warnings", warnings},
                  {"validation_set", split.validation.empty() ? "train" : "validation"}};
  return result;
}

FitResult fit_nea_linear(const KinematicTree& tree, const Dataset& data, const TrainConfig& cfg) {
  check_data(data, tree.dof());
  const std::size_t dof = tree.dof();
  const RealizedTree<double> kin = realize_prior_tree(tree);
  const Split split = split_indices(data.samples.size(), cfg.validation_fraction, cfg.seed);

  auto stack = [&](const std::vector<std::size_t>& idx, Eigen::MatrixXd& y, Eigen::VectorXd& tau) {
    y.resize(static_cast<Eigen::Index>(idx.size() * dof), static_cast<Eigen::Index>(10 * dof));
    tau.resize(static_cast<Eigen::Index>(idx.size() * dof));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const Sample& s = data.samples[idx[r]];
      y.block(static_cast<Eigen::Index>(r * dof), 0, static_cast<Eigen::Index>(dof), y.cols()) =
          inertial_regressor(kin, s.q, s.qd, s.qdd);
      for (std::size_t j = 0; j < dof; ++j) tau(static_cast<Eigen::Index>(r * dof + j)) = s.tau[j];
    }
  };
  Eigen::MatrixXd y;
  Eigen::VectorXd tau;
  stack(split.train, y, tau);

  // Column scaling keeps the rank decision independent of units.
  Eigen::VectorXd scale = y.colwise().norm().transpose();
  for (Eigen::Index c = 0; c < scale.size(); ++c) {
    if (!(scale(c) > 0.0)) scale(c) = 1.0;
  }
  const Eigen::MatrixXd ys = y * scale.cwiseInverse().asDiagonal();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(ys);
  cod.setThreshold(1e-10);
  const Eigen::VectorXd theta = scale.cwiseInverse().asDiagonal() * cod.solve(tau);
  const double train_rms = std::sqrt((y * theta - tau).squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, tau.size())));

  double val_rms = std::numeric_limits<double>::quiet_NaN();
  if (!split.validation.empty()) {
    Eigen::MatrixXd yv;
    Eigen::VectorXd tv;
    stack(split.validation, yv, tv);
    val_rms = std::sqrt((yv * theta - tv).squaredNorm() / static_cast<double>(tv.size()));
  }

  FitResult result;
  result.config = cfg;
  result.config.model = ModelKind::kNea;
  result.config.actuator = ActuatorConfig{};
  result.tree = tree.to_json();
  result.plant = data.meta.plant;
  result.param_names = standard_param_names(tree);
  result.params.assign(theta.data(), theta.data() + theta.size());
  result.dataset = dataset_summary(data);

  nlohmann::json links = nlohmann::json::array();
  bool plausible = true;
  for (std::size_t i = 0; i < dof; ++i) {
    const GeneralizedInertia<double> g = inertia_from_standard(std::span<const double>(result.params).subspan(10 * i, 10));
    nlohmann::json j = inertia_report(tree.link(i).name, g.mass, g.first_moment, g.rotational);
    plausible = plausible && j["plausible"]["mass_nonnegative"].get<bool>() &&
                j["plausible"]["triangle_inequalities"].get<bool>();
    links.push_back(std::move(j));
  }
  result.realized = {{"links", links}, {"plausible", plausible}};

  const StandardTreeModel model(tree, result.params);
  const auto& eval_set = split.validation.empty() ? split.train : split.validation;
  try {
    result.validation_mse = forward_mse(model, data, eval_set);
    result.train_mse = forward_mse(model, data, split.train);
  } catch (const SingularInertiaError&) {
    result.validation_mse = std::numeric_limits<double>::infinity();
    result.train_mse = std::numeric_limits<double>::infinity();
  }
  result.extra = {{"rank", cod.rank()},
                  {"columns", y.cols()},
                  {"rank_deficient", cod.rank() < y.cols()},
                  {"torque_rms_train", train_rms},
                  {"torque_rms_validation", std::isfinite(val_rms) ? nlohmann::json(val_rms) : nlohmann::json(nullptr)}};
  return result;
}

FitResult fit_ffnn(const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.samples.empty()) throw std::invalid_argument("dataset is empty");
  const std::size_t dof = data.meta.dof;
  const Split split = split_indices(data.samples.size(), cfg.validation_fraction, cfg.seed);

  Normalization norm;
  norm.in_mean.assign(3 * dof, 0.0);
  norm.in_std.assign(3 * dof, 0.0);
  norm.out_mean.assign(dof, 0.0);
  norm.out_std.assign(dof, 0.0);
  auto features = [dof](const Sample& s, std::size_t f) {
    return f < dof ? s.q[f] : (f < 2 * dof ? s.qd[f - dof] : s.tau[f - 2 * dof]);
  };
  const double n = static_cast<double>(split.train.size());
  for (const std::size_t k : split.train) {
    const Sample& s = data.samples[k];
    for (std::size_t f = 0; f < 3 * dof; ++f) norm.in_mean[f] += features(s, f) / n;
    for (std::size_t j = 0; j < dof; ++j) norm.out_mean[j] += s.qdd[j] / n;
  }
  for (const std::size_t k : split.train) {
    const Sample& s = data.samples[k];
    for (std::size_t f = 0; f < 3 * dof; ++f) norm.in_std[f] += std::pow(features(s, f) - norm.in_mean[f], 2) / n;
    for (std::size_t j = 0; j < dof; ++j) norm.out_std[j] += std::pow(s.qdd[j] - norm.out_mean[j], 2) / n;
  }
  for (double& v : norm.in_std) v = v > 1e-24 ? std::sqrt(v) : 1.0;
  for (double& v : norm.out_std) v = v > 1e-24 ? std::sqrt(v) : 1.0;

  const Mlp mlp(ffnn_layers(dof, cfg.ffnn_hidden));
  const FfnnObjective objective(mlp, norm);
  std::vector<double> weights(dof);
  for (std::size_t j = 0; j < dof; ++j) weights[j] = 1.0 / (norm.out_std[j] * norm.out_std[j]);

  FitResult result;
  TrainOutcome best;
  std::vector<double> best_initial;
  nlohmann::json restarts = nlohmann::json::array();
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    const std::uint64_t seed = cfg.restarts == 1 ? cfg.seed : derive_seed(cfg.seed, r);
    std::vector<double> values(mlp.param_count());
    std::mt19937_64 rng(derive_seed(seed, 0xff));
    mlp.initialize(values, rng);
    const std::vector<double> initial = values;
    TrainOutcome outcome =
        train_adam(objective, values, std::vector<bool>(values.size(), true), data, split, cfg, weights, seed);
    restarts.push_back({{"restart", r}, {"seed", seed}, {"validation_mse", outcome.best_validation}});
    if (r == 0 || outcome.best_validation < best.best_validation) {
      best = std::move(outcome);
      best_initial = initial;
    }
  }

  result.config = cfg;
  result.config.model = ModelKind::kFfnn;
  result.tree = nullptr;
  result.plant = data.meta.plant;
  result.param_names = mlp.param_names("ffnn");
  result.params = best.best;
  result.initial_params = best_initial;
  result.train_curve = best.train_curve;
  result.validation_curve = best.validation_curve;
  result.validation_mse = best.best_validation;
  result.train_mse = best.train_mse;
  result.best_epoch = best.best_epoch;
  result.dataset = dataset_summary(data);
  result.realized = nlohmann::json::object();
  result.extra = {{"layers", mlp.layers()}, {"normalization", norm.to_json()}, {"restarts", restarts},
                  {"validation_set", split.validation.empty() ? "train" : "validation"}};
  return result;
}

FitResult fit(const KinematicTree& tree, const Dataset& data, const TrainConfig& cfg) {
  switch (cfg.model) {
    case ModelKind::kDiffNea:
    case ModelKind::kNoKinDiffNea:
      return fit_diffnea(tree, data, cfg);
    case ModelKind::kNea:
      return fit_nea_linear(tree, data, cfg);
    case ModelKind::kFfnn:
      return fit_ffnn(data, cfg);
  }
  throw std::invalid_argument("unknown model kind");
}

namespace {

nlohmann::json doubles(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (const double x : v) a.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
  return a;
}

std::vector<double> read_doubles(const nlohmann::json& a) {
  std::vector<double> v;
  for (const auto& x : a) v.push_back(x.is_null() ? std::numeric_limits<double>::infinity() : x.get<double>());
  return v;
}

double read_double(const nlohmann::json& doc, const char* key) {
  const auto& x = doc.at(key);
  return x.is_null() ? std::numeric_limits<double>::infinity() : x.get<double>();
}

}  // namespace

nlohmann::json FitResult::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "diffnea-fit";
  j["version"] = 1;
  j["config"] = nlohmann::ordered_json::parse(diffnea::to_json(config).dump());
  j["dataset"] = nlohmann::ordered_json::parse(dataset.dump());
  j["tree"] = nlohmann::ordered_json::parse(tree.dump());
  j["plant"] = nlohmann::ordered_json::parse(plant.dump());
  j["validation_mse"] = std::isfinite(validation_mse) ? nlohmann::ordered_json(validation_mse) : nlohmann::ordered_json(nullptr);
  j["train_mse"] = std::isfinite(train_mse) ? nlohmann::ordered_json(train_mse) : nlohmann::ordered_json(nullptr);
  j["best_epoch"] = best_epoch;
  j["realized"] = nlohmann::ordered_json::parse(realized.dump());
  j["param_names"] = param_names;
  j["params"] = nlohmann::ordered_json::parse(doubles(params).dump());
  j["initial_params"] = nlohmann::ordered_json::parse(doubles(initial_params).dump());
  j["train_curve"] = nlohmann::ordered_json::parse(doubles(train_curve).dump());
  j["validation_curve"] = nlohmann::ordered_json::parse(doubles(validation_curve).dump());
  j["extra"] = nlohmann::ordered_json::parse(extra.dump());
  return nlohmann::json::parse(j.dump());
}

FitResult FitResult::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format", "") != "diffnea-fit") throw ParseError(1, "not a diffnea fit result");
  if (doc.value("version", 0) != 1) throw ParseError(1, "unsupported fit result version");
  FitResult r;
  try {
    r.config = train_config_from_json(doc.at("config"));
    r.dataset = doc.at("dataset");
    r.tree = doc.at("tree");
    r.plant = doc.value("plant", nlohmann::json());
    r.validation_mse = read_double(doc, "validation_mse");
    r.train_mse = read_double(doc, "train_mse");
    r.best_epoch = doc.at("best_epoch").get<std::size_t>();
    r.realized = doc.at("realized");
    r.param_names = doc.at("param_names").get<std::vector<std::string>>();
    r.params = read_doubles(doc.at("params"));
    r.initial_params = read_doubles(doc.at("initial_params"));
    r.train_curve = read_doubles(doc.at("train_curve"));
    r.validation_curve = read_doubles(doc.at("validation_curve"));
    r.extra = doc.at("extra");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("malformed fit result: ") + e.what());
  }
  if (r.params.size() != r.param_names.size()) throw ParseError(1, "parameter names and values differ in length");
  return r;
}

void FitResult::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << nlohmann::ordered_json::parse(to_json().dump()).dump(1) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

FitResult FitResult::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(1, std::string("invalid JSON: ") + e.what());
  }
  return from_json(doc);
}

std::unique_ptr<DynamicsModel> make_model(const FitResult& fit) {
  std::optional<Plant> plant;
  if (fit.plant.is_object() && fit.plant.contains("system")) plant = Plant::from_json(fit.plant);
  switch (fit.config.model) {
    case ModelKind::kDiffNea:
    case ModelKind::kNoKinDiffNea: {
      const KinematicTree tree = KinematicTree::from_json(fit.tree);
      const TreeParamLayout layout{0, tree.dof()};
      ActuatorModel act(fit.config.actuator, joint_names(tree), joint_is_revolute(tree));
      act.set_offset(layout.size());
      if (fit.params.size() != layout.size() + act.param_count()) {
        throw ParseError(1, "fit result parameter count does not match its tree and actuator");
      }
      return std::make_unique<TreeModel>(tree, fit.params, layout, act);
    }
    case ModelKind::kNea: {
      const KinematicTree tree = KinematicTree::from_json(fit.tree);
      if (fit.params.size() != 10 * tree.dof()) throw ParseError(1, "NEA fit must hold 10 parameters per link");
      return std::make_unique<StandardTreeModel>(tree, fit.params);
    }
    case ModelKind::kFfnn: {
      const Mlp mlp(fit.extra.at("layers").get<std::vector<std::size_t>>());
      if (fit.params.size() != mlp.param_count()) throw ParseError(1, "network parameter count mismatch");
      return std::make_unique<FfnnModel>(mlp, Normalization::from_json(fit.extra.at("normalization")), fit.params,
                                         plant);
    }
  }
  throw std::invalid_argument("unknown model kind");
}

}  // namespace diffnea
