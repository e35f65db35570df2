#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "diffnea/dynamics.hpp"
#include "diffnea/errors.hpp"
#include "diffnea/ident.hpp"
#include "diffnea/systems.hpp"

namespace diffnea {
namespace {

const Dataset& cartpole_uniform() {
  static const Dataset ds =
      generate_uniform(Plant::cartpole(), 3000, UniformRanges::defaults(SystemKind::kCartpole), 77);
  return ds;
}

KinematicTree pendulum() {
  Link rod;
  rod.name = "rod";
  rod.kin.rpy = {0.5 * std::numbers::pi, 0.0, 0.0};
  rod.inertial.mass = 1.0;
  rod.inertial.com = {0.0, -1.0, 0.0};
  return KinematicTree("pendulum", Eigen::Vector3d(0, 0, -9.81), {rod});
}

std::vector<double> rnea_with(const KinematicTree& tree, std::span<const double> theta, std::span<const double> q,
                              std::span<const double> qd, std::span<const double> qdd) {
  RealizedTree<double> t = realize_prior_tree(tree);
  for (std::size_t i = 0; i < t.dof(); ++i) t.links[i].inertia = inertia_from_standard(theta.subspan(10 * i, 10));
  return rnea_inverse<double>(t, q, qd, qdd).tau;
}

TEST(Ident, NamesAndConfigRoundTrip) {
  for (const ModelKind k : {ModelKind::kDiffNea, ModelKind::kNoKinDiffNea, ModelKind::kNea, ModelKind::kFfnn}) {
    EXPECT_EQ(model_kind_from_string(to_string(k)), k);
  }
  EXPECT_EQ(init_kind_from_string("random"), InitKind::kRandom);
  TrainConfig cfg;
  cfg.model = ModelKind::kNoKinDiffNea;
  cfg.actuator.kind = ActuatorKind::kStribeck;
  cfg.epochs = 12;
  cfg.restarts = 5;
  cfg.ffnn_hidden = {4, 5};
  const TrainConfig back = train_config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back).dump(), to_json(cfg).dump());
  EXPECT_EQ(train_config_from_json(nlohmann::json::object()).epochs, TrainConfig{}.epochs);
  cfg.adam.beta2 = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Ident, SplitIsDeterministicPartition) {
  const Split a = split_indices(1000, 0.1, 3);
  EXPECT_EQ(a.validation.size(), 100u);
  EXPECT_EQ(a.train.size(), 900u);
  std::vector<std::size_t> all = a.train;
  all.insert(all.end(), a.validation.begin(), a.validation.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) ASSERT_EQ(all[i], i);
  EXPECT_EQ(split_indices(1000, 0.1, 3).validation, a.validation);
  EXPECT_NE(split_indices(1000, 0.1, 4).validation, a.validation);
  EXPECT_TRUE(split_indices(10, 0.0, 1).validation.empty());
}

TEST(Ident, RegressorStaticsColumns) {
  // Pendulum held horizontal: only the first moment along the rod carries gravity.
  const KinematicTree tree = pendulum();
  const std::vector<double> q{std::numbers::pi / 2}, z{0.0};
  const Eigen::MatrixXd y = inertial_regressor(realize_prior_tree(tree), q, z, z);
  ASSERT_EQ(y.rows(), 1);
  ASSERT_EQ(y.cols(), 10);
  EXPECT_NEAR(y(0, 0), 0.0, 1e-12);   // mass at the joint axis
  EXPECT_NEAR(y(0, 2), -9.81, 1e-12);  // h_y, the rod points along -y
  for (int c = 4; c < 10; ++c) EXPECT_NEAR(y(0, c), 0.0, 1e-12);
  // True pendulum: h = (0, -1, 0).
  EXPECT_NEAR(y(0, 2) * -1.0, 9.81, 1e-12);
}

TEST(Ident, RegressorIsLinearInParameters) {
  const KinematicTree tree = furuta_tree({});
  const RealizedTree<double> kin = realize_prior_tree(tree);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> q{u(rng), u(rng)}, qd{u(rng), u(rng)}, qdd{u(rng), u(rng)};
    std::vector<double> t1(20), t2(20), mix(20);
    for (auto* v : {&t1, &t2}) {
      for (double& x : *v) x = u(rng);
    }
    const double a = 0.7, b = -1.3;
    for (int i = 0; i < 20; ++i) mix[i] = a * t1[i] + b * t2[i];
    const auto r1 = rnea_with(tree, t1, q, qd, qdd), r2 = rnea_with(tree, t2, q, qd, qdd);
    const auto rm = rnea_with(tree, mix, q, qd, qdd);
    const Eigen::MatrixXd y = inertial_regressor(kin, q, qd, qdd);
    const Eigen::VectorXd ym = y * Eigen::Map<const Eigen::VectorXd>(mix.data(), 20);
    for (int j = 0; j < 2; ++j) {
      EXPECT_NEAR(rm[j], a * r1[j] + b * r2[j], 1e-10);
      EXPECT_NEAR(rm[j], ym(j), 1e-10);
    }
  }
}

TEST(Ident, StandardParametersOfPrior) {
  const KinematicTree tree = cartpole_tree({});
  const RealizedTree<double> kin = realize_prior_tree(tree);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  // Recover the true standard parameters from prior inertias, then check Y theta = tau.
  std::vector<double> theta;
  for (const auto& link : kin.links) {
    const auto& g = link.inertia;
    const Eigen::Matrix3d& j = g.rotational;
    for (const double x : {g.mass, g.first_moment(0), g.first_moment(1), g.first_moment(2), j(0, 0), j(0, 1),
                           j(0, 2), j(1, 1), j(1, 2), j(2, 2)}) {
      theta.push_back(x);
    }
  }
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> q{u(rng), u(rng)}, qd{u(rng), u(rng)}, qdd{u(rng), u(rng)};
    const auto tau = rnea_inverse<double>(kin, q, qd, qdd).tau;
    const Eigen::VectorXd yt = inertial_regressor(kin, q, qd, qdd) * Eigen::Map<const Eigen::VectorXd>(theta.data(), 20);
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(yt(j), tau[j], 1e-10);
  }
}

TEST(Ident, NeaExactOnNoiselessData) {
  const FitResult r = fit_nea_linear(cartpole_tree({}), cartpole_uniform());
  EXPECT_LT(r.extra.at("torque_rms_train").get<double>(), 1e-8);
  EXPECT_LT(r.extra.at("torque_rms_validation").get<double>(), 1e-8);
  EXPECT_EQ(r.params.size(), 20u);
  EXPECT_EQ(r.param_names[0], "cart.m");
  EXPECT_TRUE(r.extra.at("rank_deficient").get<bool>());  // cart rotation never excited
  EXPECT_LT(r.validation_mse, 1e-12);
}

TEST(Ident, NeaSingleSampleIsMinimumNorm) {
  Dataset one = cartpole_uniform();
  one.samples.resize(1);
  TrainConfig cfg;
  cfg.validation_fraction = 0.0;
  const FitResult r = fit_nea_linear(cartpole_tree({}), one, cfg);
  EXPECT_TRUE(r.extra.at("rank_deficient").get<bool>());
  EXPECT_LE(r.extra.at("rank").get<int>(), 2);
  for (const double p : r.params) EXPECT_TRUE(std::isfinite(p));
  EXPECT_LT(r.extra.at("torque_rms_train").get<double>(), 1e-10);
}

TEST(Ident, NeaFlagsImplausibleEstimates) {
  Dataset noisy = cartpole_uniform();
  noisy.samples.resize(40);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 5.0);
  for (Sample& s : noisy.samples) {
    for (double& x : s.qdd) x += n(rng);
  }
  const FitResult r = fit_nea_linear(cartpole_tree({}), noisy);
  bool all = true;
  for (const auto& link : r.realized.at("links")) {
    all = all && link.at("plausible").at("mass_nonnegative").get<bool>() &&
          link.at("plausible").at("triangle_inequalities").get<bool>();
  }
  EXPECT_EQ(r.realized.at("plausible").get<bool>(), all);
}

TEST(Ident, DiffNeaWithPriorRecoversDynamics) {
  TrainConfig cfg;
  cfg.epochs = 5;
  const FitResult r = fit_diffnea(cartpole_tree({}), cartpole_uniform(), cfg);
  EXPECT_LT(r.validation_mse, 1e-6);
  for (std::size_t i = 1; i < r.validation_curve.size(); ++i) {
    EXPECT_LE(r.validation_curve[i], r.validation_curve[i - 1]);
  }
}

TEST(Ident, FrozenGroupsAreBitIdentical) {
  KinematicTree base = cartpole_tree({});
  std::vector<Link> links = base.links();
  links[0].learn_inertial = false;
  const KinematicTree tree(base.name(), base.gravity(), links);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.init = InitKind::kRandom;
  cfg.actuator.kind = ActuatorKind::kViscous;
  for (const ModelKind kind : {ModelKind::kDiffNea, ModelKind::kNoKinDiffNea}) {
    cfg.model = kind;
    const FitResult r = fit_diffnea(tree, cartpole_uniform(), cfg);
    const TreeParamLayout layout{0, 2};
    for (std::size_t k = 0; k < kInertialParamsPerLink; ++k) {
      const std::size_t i = layout.inertial_offset(0) + k;
      EXPECT_EQ(r.params[i], r.initial_params[i]) << r.param_names[i];
    }
    for (std::size_t link = 0; link < 2; ++link) {
      for (std::size_t k = 0; k < kKinParamsPerLink; ++k) {
        const std::size_t i = layout.kin_offset(link) + k;
        if (kind == ModelKind::kDiffNea) {
          EXPECT_EQ(r.params[i], r.initial_params[i]) << r.param_names[i];
        }
      }
    }
    // The learnable pole inertia moved.
    EXPECT_NE(r.params[layout.inertial_offset(1) + 3], r.initial_params[layout.inertial_offset(1) + 3]);
  }
}

TEST(Ident, DiffNeaResultsArePlausible) {
  TrainConfig cfg;
  cfg.model = ModelKind::kNoKinDiffNea;
  cfg.init = InitKind::kRandom;
  cfg.epochs = 3;
  cfg.adam.step_size = 0.05;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    cfg.seed = seed;
    const FitResult r = fit_diffnea(furuta_tree({}), generate_uniform(Plant::furuta(), 500,
                                                                      UniformRanges::defaults(SystemKind::kFuruta), seed),
                                    cfg);
    for (const auto& link : r.realized.at("links")) {
      EXPECT_TRUE(link.at("plausible").at("mass_nonnegative").get<bool>());
      EXPECT_TRUE(link.at("plausible").at("triangle_inequalities").get<bool>());
    }
  }
}

TEST(Ident, RandomInitIsSeededAndMasked) {
  const KinematicTree tree = cartpole_tree({});
  const TreeParamLayout layout{0, 2};
  const std::vector<double> prior = prior_tree_values(tree);
  std::vector<bool> mask(layout.size(), true);
  for (std::size_t k = 0; k < kKinParamsPerLink; ++k) mask[layout.kin_offset(0) + k] = false;
  std::vector<double> a = prior, b = prior;
  const std::unique_ptr<bool[]> m(new bool[mask.size()]);
  for (std::size_t i = 0; i < mask.size(); ++i) m[i] = mask[i];
  randomize_tree_params(a, layout, {m.get(), mask.size()}, 5);
  randomize_tree_params(b, layout, {m.get(), mask.size()}, 5);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!mask[i]) {
      EXPECT_EQ(a[i], prior[i]);
    }
  }
  const std::size_t sm = layout.inertial_offset(1) + 3;
  EXPECT_GE(a[sm], 0.1);
  EXPECT_LE(a[sm], 1.0);
}

TEST(Ident, FfnnMemorizesTinyDataset) {
  Dataset tiny = cartpole_uniform();
  tiny.samples.resize(10);
  TrainConfig cfg;
  cfg.model = ModelKind::kFfnn;
  cfg.validation_fraction = 0.0;
  cfg.batch_size = 10;
  cfg.epochs = 20000;
  cfg.adam.step_size = 1e-2;
  cfg.lr_decay = 0.9997;
  cfg.min_step_size = 1e-4;
  cfg.ffnn_hidden = {32, 32};
  cfg.target_loss = 1e-7;
  const FitResult r = fit_ffnn(tiny, cfg);
  EXPECT_LT(r.train_mse, 1e-6);
}

TEST(Ident, FfnnBeatsPredictingTheMean) {
  TrainConfig cfg;
  cfg.model = ModelKind::kFfnn;
  cfg.epochs = 30;
  cfg.adam.step_size = 3e-3;
  const FitResult r = fit_ffnn(cartpole_uniform(), cfg);
  double variance = 0.0;
  const auto& s = cartpole_uniform().samples;
  for (std::size_t j = 0; j < 2; ++j) {
    double mean = 0.0;
    for (const Sample& x : s) mean += x.qdd[j];
    mean /= static_cast<double>(s.size());
    for (const Sample& x : s) variance += (x.qdd[j] - mean) * (x.qdd[j] - mean);
  }
  variance /= static_cast<double>(2 * s.size());
  EXPECT_LT(r.validation_mse, variance);
}

TEST(Ident, FitsAreDeterministic) {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 11;
  cfg.init = InitKind::kRandom;
  cfg.actuator.kind = ActuatorKind::kNNFriction;
  cfg.actuator.hidden = {8};
  EXPECT_EQ(fit_diffnea(cartpole_tree({}), cartpole_uniform(), cfg).params,
            fit_diffnea(cartpole_tree({}), cartpole_uniform(), cfg).params);
  cfg.jobs = 3;
  cfg.model = ModelKind::kFfnn;
  cfg.ffnn_hidden = {16};
  EXPECT_EQ(fit_ffnn(cartpole_uniform(), cfg).params, fit_ffnn(cartpole_uniform(), cfg).params);
}

TEST(Ident, FitResultRoundTrip) {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.actuator.kind = ActuatorKind::kStribeck;
  for (const ModelKind kind : {ModelKind::kDiffNea, ModelKind::kNea, ModelKind::kFfnn}) {
    cfg.model = kind;
    cfg.ffnn_hidden = {8};
    const FitResult r = fit(cartpole_tree({}), cartpole_uniform(), cfg);
    const auto path = std::filesystem::temp_directory_path() / "diffnea_fit.json";
    r.save(path);
    const FitResult back = FitResult::load(path);
    EXPECT_EQ(back.to_json().dump(), r.to_json().dump());
    const auto m1 = make_model(r), m2 = make_model(back);
    const Sample& s = cartpole_uniform().samples[0];
    EXPECT_EQ(m1->accel(s.q, s.qd, s.tau), m2->accel(s.q, s.qd, s.tau));
    std::filesystem::remove(path);
  }
  EXPECT_THROW(FitResult::from_json(nlohmann::json{{"format", "other"}}), ParseError);
  EXPECT_THROW(FitResult::load("/nonexistent/fit.json"), IoError);
}

TEST(Ident, NonFiniteLossAborts) {
  Dataset bad = cartpole_uniform();
  bad.samples.resize(50);
  for (Sample& s : bad.samples) s.qdd[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 2;
  EXPECT_THROW(fit_diffnea(cartpole_tree({}), bad, cfg), NumericAbort);
}

TEST(Ident, RejectsMismatchedDataset) {
  Link rod = pendulum().link(0);
  const KinematicTree one("one", Eigen::Vector3d(0, 0, -9.81), {rod});
  EXPECT_THROW(fit_diffnea(one, cartpole_uniform(), {}), std::invalid_argument);
}

}  // namespace
}  // namespace diffnea
