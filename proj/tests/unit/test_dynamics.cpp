#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "diffnea/dynamics.hpp"
#include "diffnea/errors.hpp"
#include "diffnea/param_set.hpp"
#include "diffnea/sim.hpp"
#include "diffnea/systems.hpp"

namespace diffnea {
namespace {

// Point mass 1 kg on a massless 1 m rod; q = 0 hangs straight down.
KinematicTree pendulum(double mass = 1.0) {
  Link rod;
  rod.name = "rod";
  rod.joint = JointType::kRevolute;
  rod.kin.rpy = {0.5 * std::numbers::pi, 0.0, 0.0};
  rod.inertial.mass = mass;
  rod.inertial.com = {0.0, -1.0, 0.0};
  return KinematicTree("pendulum", Eigen::Vector3d(0, 0, -9.81), {rod});
}

std::vector<double> qdd_of(const RealizedTree<double>& t, std::vector<double> q, std::vector<double> qd,
                           std::vector<double> u) {
  return aba_forward<double>(t, q, qd, u).qdd;
}

struct RandomState {
  std::vector<double> q, qd, u;
};

RandomState draw(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> a(-std::numbers::pi, std::numbers::pi), v(-5.0, 5.0), f(-2.0, 2.0);
  RandomState s;
  for (std::size_t i = 0; i < n; ++i) {
    s.q.push_back(a(rng));
    s.qd.push_back(v(rng));
    s.u.push_back(f(rng));
  }
  return s;
}

TEST(Dynamics, PendulumHorizontal) {
  const auto t = realize_prior_tree(pendulum());
  EXPECT_NEAR(qdd_of(t, {std::numbers::pi / 2}, {0.0}, {0.0})[0], -9.81, 1e-12);
  EXPECT_NEAR(qdd_of(t, {0.0}, {0.0}, {0.0})[0], 0.0, 1e-12);
}

TEST(Dynamics, PendulumStatics) {
  const auto t = realize_prior_tree(pendulum());
  const std::vector<double> q{std::numbers::pi / 2}, z{0.0};
  EXPECT_NEAR(rnea_inverse<double>(t, q, z, z).tau[0], 9.81, 1e-12);
}

TEST(Dynamics, PendulumKineticEnergy) {
  const auto t = realize_prior_tree(pendulum(2.0));
  const std::vector<double> q{0.0}, qd{3.0};
  const Energy<double> e = total_energy<double>(t, q, qd);
  EXPECT_NEAR(e.kinetic, 0.5 * 2.0 * 9.0, 1e-12);
  EXPECT_NEAR(e.potential, -2.0 * 9.81, 1e-12);
  EXPECT_EQ(total_energy<double>(t, q, std::vector<double>{0.0}).kinetic, 0.0);
}

TEST(Dynamics, CartpoleAtRest) {
  const auto t = realize_prior_tree(cartpole_tree({}));
  const auto qdd = qdd_of(t, {0.3, 0.0}, {0.0, 0.0}, {0.0, 0.0});
  EXPECT_NEAR(qdd[0], 0.0, 1e-14);
  EXPECT_NEAR(qdd[1], 0.0, 1e-14);
}

TEST(Dynamics, AbaInvertsRnea) {
  std::mt19937_64 rng(5);
  for (const auto& tree : {cartpole_tree({}), furuta_tree({})}) {
    const auto t = realize_prior_tree(tree);
    for (int i = 0; i < 100; ++i) {
      const RandomState s = draw(rng, 2);
      const auto tau = rnea_inverse<double>(t, s.q, s.qd, s.u).tau;
      const auto back = aba_forward<double>(t, s.q, s.qd, tau).qdd;
      for (int j = 0; j < 2; ++j) EXPECT_NEAR(back[j], s.u[j], 1e-8 * std::max(1.0, std::abs(s.u[j])));
      const auto fwd = aba_forward<double>(t, s.q, s.qd, s.u).qdd;
      const auto u = rnea_inverse<double>(t, s.q, s.qd, fwd).tau;
      for (int j = 0; j < 2; ++j) EXPECT_NEAR(u[j], s.u[j], 1e-8 * std::max(1.0, std::abs(s.u[j])));
    }
  }
}

TEST(Dynamics, MatchesClosedFormPlants) {
  std::mt19937_64 rng(11);
  for (const Plant& plant : {Plant::cartpole().frictionless(), Plant::furuta().frictionless()}) {
    const auto t = realize_prior_tree(plant.tree());
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const RandomState s = draw(rng, 2);
      const auto a = plant.accel(s.q, s.qd, s.u);
      const auto b = aba_forward<double>(t, s.q, s.qd, s.u).qdd;
      for (int j = 0; j < 2; ++j) worst = std::max(worst, std::abs(a[j] - b[j]) / std::max(1.0, std::abs(a[j])));
      const Energy<double> ea = plant.energy(s.q, s.qd), eb = total_energy<double>(t, s.q, s.qd);
      EXPECT_NEAR(ea.kinetic, eb.kinetic, 1e-10 * std::max(1.0, ea.kinetic));
      EXPECT_NEAR(ea.potential, eb.potential, 1e-10);
    }
    EXPECT_LT(worst, 1e-8) << plant.name();
  }
}

TEST(Dynamics, GravityTorquesLinearInMass) {
  CartpoleParams p;
  CartpoleParams d = p;
  d.cart_mass *= 2;
  d.pole_mass *= 2;
  const auto a = realize_prior_tree(cartpole_tree(p));
  const auto b = realize_prior_tree(cartpole_tree(d));
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const RandomState s = draw(rng, 2);
    const std::vector<double> z(2, 0.0);
    const auto ta = rnea_inverse<double>(a, s.q, z, z).tau;
    const auto tb = rnea_inverse<double>(b, s.q, z, z).tau;
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(tb[j], 2 * ta[j], 1e-12);
  }
}

TEST(Dynamics, ArticulatedInertiasSymmetric) {
  const auto t = realize_prior_tree(furuta_tree({}));
  AbaWorkspace<double> ws;
  std::mt19937_64 rng(4);
  const RandomState s = draw(rng, 2);
  aba_forward<double>(t, s.q, s.qd, s.u, &ws);
  for (const auto& pi : ws.articulated) EXPECT_LT((pi - pi.transpose()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Dynamics, SingularInertiaNamesLink) {
  const auto t = realize_prior_tree(pendulum(0.0));
  try {
    qdd_of(t, {0.0}, {0.0}, {0.0});
    FAIL() << "expected SingularInertiaError";
  } catch (const SingularInertiaError& e) {
    EXPECT_NE(std::string(e.what()).find("rod"), std::string::npos);
  }
}

TEST(Dynamics, DimensionMismatchThrows) {
  const auto t = realize_prior_tree(cartpole_tree({}));
  EXPECT_ANY_THROW(qdd_of(t, {0.0}, {0.0, 0.0}, {0.0, 0.0}));
}

TEST(Dynamics, EnergyRateMatchesInputPower) {
  // With tau held constant, the integral of tau . qd is tau . (q(T) - q(0)).
  const Plant plant = Plant::furuta().frictionless();
  const KinematicTree tree = plant.tree();
  ParamSet ps;
  const TreeParamLayout layout = add_tree_params(tree, ps);
  ActuatorModel none(ActuatorConfig{}, {"arm", "pendulum"}, {true, true});
  none.append_params(ps, 0);
  const TreeModel model(tree, {ps.values().begin(), ps.values().end()}, layout, none);
  const std::vector<double> tau{0.01, -0.002};
  auto mismatch = [&](int substeps) {
    const double dt = kDefaultDt / substeps;
    State s{{0.1, 2.5}, {0.0, 0.0}};
    const State s0 = s;
    for (int k = 0; k < 500 * substeps; ++k) s = *rk4_step(model, s, tau, dt);
    const double work = tau[0] * (s.q[0] - s0.q[0]) + tau[1] * (s.q[1] - s0.q[1]);
    const double de = model.energy(s.q, s.qd)->total() - model.energy(s0.q, s0.qd)->total();
    return std::abs(de - work);
  };
  const double coarse = mismatch(1), fine = mismatch(2);
  EXPECT_LT(coarse, 1e-4);
  // The residual is integration error: it shrinks at fourth order.
  EXPECT_GT(coarse / fine, 10.0);
}

TEST(Dynamics, AccelerationGradientsMatchFiniteDifferences) {
  const KinematicTree tree = cartpole_tree({});
  ParamSet ps;
  const TreeParamLayout layout = add_tree_params(tree, ps);
  std::vector<double> theta(ps.values().begin(), ps.values().end());
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  for (double& t : theta) t += jitter(rng);
  for (std::size_t i = 0; i < theta.size(); ++i) ps.set_value(i, theta[i]);
  const RandomState s = draw(rng, 2);
  for (std::size_t out = 0; out < 2; ++out) {
    Tape::active().clear();
    const auto leaves = ps.bind();
    const auto rt = realize_tree<DiffScalar>(tree, leaves, layout);
    std::vector<DiffScalar> q(s.q.begin(), s.q.end()), qd(s.qd.begin(), s.qd.end()), u(s.u.begin(), s.u.end());
    const DiffScalar y = aba_forward<DiffScalar>(rt, q, qd, u).qdd[out];
    const auto g = gradient(y, ps);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
      auto eval = [&](double delta) {
        std::vector<double> v = theta;
        v[i] += delta;
        return qdd_of(realize_tree<double>(tree, std::span<const double>(v), layout), s.q, s.qd, s.u)[out];
      };
      const double fd = (eval(h) - eval(-h)) / (2 * h);
      EXPECT_NEAR(g[i], fd, 1e-4 * std::max(1.0, std::abs(fd))) << ps.name(i);
    }
  }
}

}  // namespace
}  // namespace diffnea
