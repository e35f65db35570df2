#include "diffnea/actuators.hpp"

#include <cmath>
#include <stdexcept>

#include "diffnea/errors.hpp"

namespace diffnea {

std::string_view to_string(ActuatorKind kind) {
  switch (kind) {
    case ActuatorKind::kNone: return "none";
    case ActuatorKind::kViscous: return "viscous";
    case ActuatorKind::kStribeck: return "stribeck";
    case ActuatorKind::kNNFriction: return "nn_friction";
    case ActuatorKind::kNNResidual: return "nn_residual";
    case ActuatorKind::kFFNN: return "ffnn";
  }
  return "none";
}

ActuatorKind actuator_kind_from_string(std::string_view name) {
  for (const ActuatorKind k : {ActuatorKind::kNone, ActuatorKind::kViscous, ActuatorKind::kStribeck,
                               ActuatorKind::kNNFriction, ActuatorKind::kNNResidual, ActuatorKind::kFFNN}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown actuator '" + std::string(name) + "'");
}

bool is_dissipative(ActuatorKind kind) {
  return kind == ActuatorKind::kViscous || kind == ActuatorKind::kStribeck || kind == ActuatorKind::kNNFriction;
}

Mlp::Mlp(std::vector<std::size_t> layers) : layers_(std::move(layers)) {
  if (layers_.size() < 2) throw std::invalid_argument("an MLP needs at least an input and an output layer");
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    if (layers_[l] == 0 || layers_[l + 1] == 0) throw std::invalid_argument("empty MLP layer");
    param_count_ += (layers_[l] + 1) * layers_[l + 1];
  }
}

std::vector<std::string> Mlp::param_names(std::string_view prefix) const {
  std::vector<std::string> names;
  names.reserve(param_count_);
  const std::string p(prefix);
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    const std::string layer = p + ".l" + std::to_string(l);
    for (std::size_t o = 0; o < layers_[l + 1]; ++o) {
      for (std::size_t i = 0; i < layers_[l]; ++i) {
        names.push_back(layer + ".w" + std::to_string(o) + "_" + std::to_string(i));
      }
    }
    for (std::size_t o = 0; o < layers_[l + 1]; ++o) names.push_back(layer + ".b" + std::to_string(o));
  }
  return names;
}

void Mlp::initialize(std::span<double> weights, std::mt19937_64& rng) const {
  if (weights.size() != param_count_) throw std::invalid_argument("MLP weight count mismatch");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layers_[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t count = (layers_[l] + 1) * layers_[l + 1];
    for (std::size_t k = 0; k < count; ++k) weights[offset + k] = dist(rng);
    offset += count;
  }
}

nlohmann::json to_json(const ActuatorConfig& cfg) {
  return {{"kind", std::string(to_string(cfg.kind))}, {"hidden", cfg.hidden}, {"angle_encoding", cfg.angle_encoding}};
}

ActuatorConfig actuator_config_from_json(const nlohmann::json& doc) {
  ActuatorConfig cfg;
  if (doc.is_string()) {
    cfg.kind = actuator_kind_from_string(doc.get<std::string>());
    return cfg;
  }
  cfg.kind = actuator_kind_from_string(doc.value("kind", std::string("none")));
  if (doc.contains("hidden")) cfg.hidden = doc["hidden"].get<std::vector<std::size_t>>();
  cfg.angle_encoding = doc.value("angle_encoding", false);
  return cfg;
}

namespace {

bool uses_network(ActuatorKind kind) {
  return kind == ActuatorKind::kNNFriction || kind == ActuatorKind::kNNResidual || kind == ActuatorKind::kFFNN;
}

}  // namespace

ActuatorModel::ActuatorModel(ActuatorConfig cfg, std::vector<std::string> joint_names, std::vector<bool> revolute)
    : cfg_(std::move(cfg)), joint_names_(std::move(joint_names)) {
  if (revolute.size() != joint_names_.size()) throw std::invalid_argument("joint flag count mismatch");
  encode_.resize(joint_names_.size());
  joint_offset_.push_back(0);
  for (std::size_t j = 0; j < joint_names_.size(); ++j) {
    encode_[j] = cfg_.angle_encoding && revolute[j];
    std::size_t count = 0;
    if (uses_network(cfg_.kind)) {
      std::vector<std::size_t> layers;
      layers.push_back((cfg_.kind == ActuatorKind::kFFNN ? 1 : 0) + (encode_[j] ? 2 : 1) + 1);
      layers.insert(layers.end(), cfg_.hidden.begin(), cfg_.hidden.end());
      layers.push_back(1);
      mlps_.emplace_back(std::move(layers));
      count = mlps_.back().param_count();
    } else {
      mlps_.emplace_back();
      if (cfg_.kind == ActuatorKind::kViscous) count = 1;
      if (cfg_.kind == ActuatorKind::kStribeck) count = 4;
    }
    joint_offset_.push_back(joint_offset_.back() + count);
  }
}

std::size_t ActuatorModel::append_params(ParamSet& params, std::uint64_t seed) {
  offset_ = params.size();
  std::mt19937_64 rng(seed);
  for (std::size_t j = 0; j < dof(); ++j) {
    const std::string prefix = joint_names_[j] + ".act";
    switch (cfg_.kind) {
      case ActuatorKind::kNone:
        break;
      case ActuatorKind::kViscous:
        params.add(prefix + ".sqrt_mu_v", 0.1);
        break;
      case ActuatorKind::kStribeck:
        params.add(prefix + ".sqrt_f_s", 0.1);
        params.add(prefix + ".sqrt_f_d", 0.1);
        params.add(prefix + ".sqrt_nu_s", 1.0);
        params.add(prefix + ".sqrt_mu_v", 0.1);
        break;
      case ActuatorKind::kNNFriction:
      case ActuatorKind::kNNResidual:
      case ActuatorKind::kFFNN: {
        const Mlp& mlp = mlps_[j];
        std::vector<double> w(mlp.param_count());
        mlp.initialize(w, rng);
        const auto names = mlp.param_names(prefix);
        for (std::size_t k = 0; k < w.size(); ++k) params.add(names[k], w[k]);
        break;
      }
    }
  }
  return offset_;
}

double ActuatorModel::dissipation_rate(std::span<const double> params, std::span<const double> q,
                                       std::span<const double> qd) const {
  if (cfg_.kind == ActuatorKind::kNNResidual || cfg_.kind == ActuatorKind::kFFNN) {
    throw UnsupportedVariant("dissipation_rate is undefined for actuator '" + std::string(to_string(cfg_.kind)) +
                             "': it carries no energy guarantee");
  }
  double rate = 0.0;
  for (std::size_t j = 0; j < dof(); ++j) {
    const double tau = apply_joint<double>(params, j, 0.0, q[j], qd[j]);
    rate += tau * qd[j];
  }
  return rate;
}

nlohmann::json ActuatorModel::realized(std::span<const double> params) const {
  nlohmann::json out = nlohmann::json::object();
  out["kind"] = std::string(to_string(cfg_.kind));
  nlohmann::json joints = nlohmann::json::array();
  for (std::size_t j = 0; j < dof(); ++j) {
    const double* p = params.data() + offset_ + joint_offset_[j];
    nlohmann::json item = {{"joint", joint_names_[j]}};
    if (cfg_.kind == ActuatorKind::kViscous) item["mu_v"] = p[0] * p[0];
    if (cfg_.kind == ActuatorKind::kStribeck) {
      item["f_s"] = p[0] * p[0];
      item["f_d"] = p[1] * p[1];
      item["nu_s"] = p[2] * p[2];
      item["mu_v"] = p[3] * p[3];
    }
    if (uses_network(cfg_.kind)) item["layers"] = mlps_[j].layers();
    joints.push_back(std::move(item));
  }
  out["joints"] = std::move(joints);
  return out;
}

}  // namespace diffnea
