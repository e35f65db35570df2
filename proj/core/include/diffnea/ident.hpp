#pragma once

// Identification procedures: gradient-based fits of the rigid-body model
// (with or without known kinematics), classical least-squares regression of
// the standard inertial parameters, and a plain feed-forward network.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffnea/actuators.hpp"
#include "diffnea/adam.hpp"
#include "diffnea/data.hpp"
#include "diffnea/model.hpp"
#include "diffnea/sim.hpp"

namespace diffnea {

enum class ModelKind { kDiffNea, kNoKinDiffNea, kNea, kFfnn };
enum class InitKind { kPrior, kRandom };

std::string_view to_string(ModelKind kind);
/// diffnea, nokin_diffnea, nea, ffnn.
ModelKind model_kind_from_string(std::string_view name);
std::string_view to_string(InitKind kind);
/// prior, random.
InitKind init_kind_from_string(std::string_view name);

struct TrainConfig {
  ModelKind model = ModelKind::kDiffNea;
  ActuatorConfig actuator;
  InitKind init = InitKind::kPrior;
  AdamConfig adam;
  double lr_decay = 1.0;           // multiplicative step-size decay per epoch
  double min_step_size = 0.0;
  std::size_t batch_size = 256;
  std::size_t epochs = 5000;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  std::size_t restarts = 1;
  double target_loss = 0.0;        // stop once the validation MSE drops below this
  std::size_t jobs = 1;            // threads sharing a batch
  std::vector<std::size_t> ffnn_hidden = {64, 64};

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& doc);

/// Virtual-parameter draw for "without prior" initialization: sqrt mass and
/// sqrt moments ~ U(0.1, 1), angles ~ U(-pi, pi), translations ~ U(-0.5, 0.5).
/// Only groups whose mask bit is set are redrawn.
void randomize_tree_params(std::span<double> values, const TreeParamLayout& layout, std::span<const bool> mask,
                           std::uint64_t seed);

struct FitResult {
  TrainConfig config;
  nlohmann::json tree;                  // structure and priors (KinematicTree::to_json)
  nlohmann::json plant;                 // generating plant, if the dataset recorded one
  std::vector<std::string> param_names;
  std::vector<double> params;           // best-validation parameters
  std::vector<double> initial_params;
  nlohmann::json realized;              // per-link physical parameters and plausibility
  std::vector<double> train_curve;      // per epoch
  std::vector<double> validation_curve; // best-so-far validation MSE per epoch
  double validation_mse = 0.0;
  double train_mse = 0.0;
  std::size_t best_epoch = 0;
  nlohmann::json dataset;               // metadata of the training data
  nlohmann::json extra = nlohmann::json::object();  // model-specific (normalization, rank, restarts)

  nlohmann::json to_json() const;
  static FitResult from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static FitResult load(const std::filesystem::path& path);
};

/// Gradient-based fit of the tree (and actuator) parameters by minimizing
/// the mean squared forward-dynamics error. cfg.model selects whether the
/// kinematic parameters are learnable (no-Kin) or fixed to the priors.
FitResult fit_diffnea(const KinematicTree& tree, const Dataset& data, const TrainConfig& cfg);

/// Least-squares estimate of the 10 standard inertial parameters per link
/// (m, m c, J about the link origin) from inverse dynamics.
FitResult fit_nea_linear(const KinematicTree& tree, const Dataset& data, const TrainConfig& cfg = {});

/// q'' = f_NN(q, qd, tau_d) trained with ADAM on standardized inputs/outputs.
FitResult fit_ffnn(const Dataset& data, const TrainConfig& cfg);

/// Dispatches on cfg.model.
FitResult fit(const KinematicTree& tree, const Dataset& data, const TrainConfig& cfg);

/// Standard inertial regressor: tau = Y(q, qd, qdd) theta with theta the
/// 10 standard parameters per link, columns from unit-basis inverse dynamics.
Eigen::MatrixXd inertial_regressor(const RealizedTree<double>& kinematics, std::span<const double> q,
                                   std::span<const double> qd, std::span<const double> qdd);
/// GeneralizedInertia from (m, h_x, h_y, h_z, J_xx, J_xy, J_xz, J_yy, J_yz, J_zz).
GeneralizedInertia<double> inertia_from_standard(std::span<const double> theta);

/// Rollout model for a fit; energy comes from the tree, or from the
/// recorded plant for the network baseline.
std::unique_ptr<DynamicsModel> make_model(const FitResult& fit);

/// Mean over samples and joints of (q''_model - q''_label)^2.
double forward_mse(const DynamicsModel& model, const Dataset& data, std::span<const std::size_t> indices = {});

/// Deterministic train / validation split of sample indices.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};
Split split_indices(std::size_t n, double validation_fraction, std::uint64_t seed);

}  // namespace diffnea
