#pragma once

// Per-joint actuator models and the small MLPs used by the learned variants.
//
//   None        tau = tau_d
//   Viscous     tau = tau_d - mu_v qd
//   Stribeck    tau = tau_d - sign(qd) (f_s + f_d exp(-nu_s qd^2)) - mu_v qd
//   NNFriction  tau = tau_d - sign(qd) |f_NN(q, qd)|_1
//   NNResidual  tau = tau_d - f_NN(q, qd)
//   FFNN        tau = f_NN(tau_d, q, qd)
//
// Coefficients are stored as virtual parameters whose squares are the
// physical values, so mu_v, f_s, f_d, nu_s >= 0 for any parameter values.
// Every joint has its own coefficients / network.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffnea/param_set.hpp"
#include "diffnea/scalar.hpp"

namespace diffnea {

enum class ActuatorKind { kNone, kViscous, kStribeck, kNNFriction, kNNResidual, kFFNN };

std::string_view to_string(ActuatorKind kind);
/// Accepts none, viscous, stribeck, nn_friction, nn_residual, ffnn.
ActuatorKind actuator_kind_from_string(std::string_view name);

/// Viscous, Stribeck and NNFriction can only remove energy.
bool is_dissipative(ActuatorKind kind);

/// Fully connected network: tanh on hidden layers, identity output.
/// Weights live outside the object; layer l stores W_l (out x in, row-major)
/// followed by b_l.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<std::size_t> layers);

  const std::vector<std::size_t>& layers() const noexcept { return layers_; }
  std::size_t input_size() const { return layers_.front(); }
  std::size_t output_size() const { return layers_.back(); }
  /// sum over layers of (n_i + 1) n_{i+1}.
  std::size_t param_count() const noexcept { return param_count_; }

  std::vector<std::string> param_names(std::string_view prefix) const;

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void initialize(std::span<double> weights, std::mt19937_64& rng) const;

  template <class T>
  std::vector<T> forward(std::span<const T> weights, std::span<const T> input) const {
    using std::tanh;
    std::vector<T> x(input.begin(), input.end());
    std::vector<T> y;
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      const std::size_t in = layers_[l];
      const std::size_t out = layers_[l + 1];
      const bool hidden = l + 2 < layers_.size();
      y.assign(out, T(0.0));
      const T* w = weights.data() + offset;
      const T* b = w + in * out;
      for (std::size_t o = 0; o < out; ++o) {
        T acc = b[o];
        for (std::size_t i = 0; i < in; ++i) acc += w[o * in + i] * x[i];
        y[o] = hidden ? T(tanh(acc)) : acc;
      }
      offset += (in + 1) * out;
      x.swap(y);
    }
    return x;
  }

 private:
  std::vector<std::size_t> layers_;
  std::size_t param_count_ = 0;
};

struct ActuatorConfig {
  ActuatorKind kind = ActuatorKind::kNone;
  std::vector<std::size_t> hidden = {32, 32};
  /// Feed (sin q, cos q) instead of q to the networks of revolute joints.
  bool angle_encoding = false;
};

nlohmann::json to_json(const ActuatorConfig& cfg);
ActuatorConfig actuator_config_from_json(const nlohmann::json& doc);

/// The actuator models of every joint of a tree. Parameter values are read
/// from a flat vector (normally a ParamSet) starting at offset().
class ActuatorModel {
 public:
  ActuatorModel() = default;
  /// `revolute[j]` selects the angle encoding per joint.
  ActuatorModel(ActuatorConfig cfg, std::vector<std::string> joint_names, std::vector<bool> revolute);

  ActuatorKind kind() const noexcept { return cfg_.kind; }
  const ActuatorConfig& config() const noexcept { return cfg_; }
  std::size_t dof() const noexcept { return joint_names_.size(); }
  std::size_t offset() const noexcept { return offset_; }
  std::size_t param_count() const noexcept { return joint_offset_.empty() ? 0 : joint_offset_.back(); }
  /// Empty for the coefficient models.
  const Mlp& network(std::size_t j) const { return mlps_.at(j); }

  /// Appends this model's parameters (seeded initial values) and records
  /// where they start.
  std::size_t append_params(ParamSet& params, std::uint64_t seed);
  /// Use parameters that already exist at `offset` (e.g. after loading).
  void set_offset(std::size_t offset) { offset_ = offset; }

  template <class T>
  T apply_joint(std::span<const T> params, std::size_t j, const T& tau_d, const T& q, const T& qd) const {
    using std::abs;
    using std::exp;
    const T* p = params.data() + offset_ + joint_offset_[j];
    switch (cfg_.kind) {
      case ActuatorKind::kNone:
        return tau_d;
      case ActuatorKind::kViscous:
        return tau_d - p[0] * p[0] * qd;
      case ActuatorKind::kStribeck: {
        const T fs = p[0] * p[0];
        const T fd = p[1] * p[1];
        const T nu = p[2] * p[2];
        const T mu = p[3] * p[3];
        return tau_d - sign(qd) * (fs + fd * exp(-(nu * qd * qd))) - mu * qd;
      }
      case ActuatorKind::kNNFriction: {
        const auto out = network_output(p, j, static_cast<const T*>(nullptr), q, qd);
        T norm = T(0.0);
        for (const T& o : out) norm += abs(o);
        return tau_d - sign(qd) * norm;
      }
      case ActuatorKind::kNNResidual:
        return tau_d - network_output(p, j, static_cast<const T*>(nullptr), q, qd)[0];
      case ActuatorKind::kFFNN:
        return network_output(p, j, &tau_d, q, qd)[0];
    }
    return tau_d;
  }

  template <class T>
  std::vector<T> apply(std::span<const T> params, std::span<const T> tau_d, std::span<const T> q,
                       std::span<const T> qd) const {
    std::vector<T> tau(dof());
    for (std::size_t j = 0; j < dof(); ++j) tau[j] = apply_joint<T>(params, j, tau_d[j], q[j], qd[j]);
    return tau;
  }

  /// (tau - tau_d) . qd. Zero for None; throws UnsupportedVariant for
  /// NNResidual and FFNN, which carry no sign guarantee.
  double dissipation_rate(std::span<const double> params, std::span<const double> q,
                          std::span<const double> qd) const;

  /// Physical coefficients per joint, for reports.
  nlohmann::json realized(std::span<const double> params) const;

 private:
  template <class T>
  std::vector<T> network_output(const T* p, std::size_t j, const T* tau_d, const T& q, const T& qd) const {
    using std::cos;
    using std::sin;
    T in[4];
    std::size_t n = 0;
    if (tau_d != nullptr) in[n++] = *tau_d;
    if (encode_[j]) {
      in[n++] = sin(q);
      in[n++] = cos(q);
    } else {
      in[n++] = q;
    }
    in[n++] = qd;
    return mlps_[j].forward<T>(std::span<const T>(p, mlps_[j].param_count()), std::span<const T>(in, n));
  }

  ActuatorConfig cfg_;
  std::vector<std::string> joint_names_;
  std::vector<bool> encode_;
  std::vector<Mlp> mlps_;
  std::vector<std::size_t> joint_offset_;  // dof + 1 entries, relative to offset_
  std::size_t offset_ = 0;
};

}  // namespace diffnea
