#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "diffnea/sim.hpp"
#include "diffnea/systems.hpp"

namespace diffnea {
namespace {

const Plant kPlants[] = {Plant::cartpole(), Plant::furuta()};

TEST(Systems, Equilibria) {
  for (const Plant& plant : kPlants) {
    const std::vector<double> z{0.0, 0.0};
    for (const double th : {0.0, std::numbers::pi}) {
      const std::vector<double> q{0.2, th};
      const auto a = plant.accel(q, z, z);
      EXPECT_NEAR(a[0], 0.0, 1e-12) << plant.name();
      EXPECT_NEAR(a[1], 0.0, 1e-12) << plant.name();
    }
  }
}

TEST(Systems, KineticTermsEvenInVelocity) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3, 3);
  for (const Plant& base : kPlants) {
    const Plant plant = base.frictionless();
    for (int i = 0; i < 200; ++i) {
      const std::vector<double> q{u(rng), u(rng)}, qd{u(rng), u(rng)}, tau{u(rng), u(rng)};
      const std::vector<double> back{-qd[0], -qd[1]};
      const auto a = plant.accel(q, qd, tau);
      const auto b = plant.accel(q, back, tau);
      for (int j = 0; j < 2; ++j) EXPECT_NEAR(a[j], b[j], 1e-10 * std::max(1.0, std::abs(a[j])));
      const auto ea = plant.energy(q, qd), eb = plant.energy(q, back);
      EXPECT_NEAR(ea.kinetic, eb.kinetic, 1e-14);
    }
  }
}

TEST(Systems, FrictionOpposesMotion) {
  for (const Plant& plant : kPlants) {
    ASSERT_TRUE(plant.has_friction());
    EXPECT_FALSE(plant.frictionless().has_friction());
    const std::vector<double> q{0.0, 0.0}, qd{1.0, 0.0}, z{0.0, 0.0};
    EXPECT_LT(plant.accel(q, qd, z)[0], plant.frictionless().accel(q, qd, z)[0]);
    // Energy decays along a free motion with friction.
    const PlantModel model(plant);
    const Trajectory t = rollout(model, State{{0.0, 1.0}, {0.5, 0.0}}, zero_torque(2), 2.0, {});
    EXPECT_LT(t.energy.back().total(), t.energy.front().total());
  }
}

TEST(Systems, FrictionlessSwingConservesEnergy) {
  for (const Plant& plant : kPlants) {
    const PlantModel model(plant.frictionless());
    const Trajectory t = rollout(model, State{{0.0, 2.0}, {0.0, 0.0}}, zero_torque(2), 10.0, {});
    const double e0 = t.energy.front().total();
    double worst = 0.0;
    for (const auto& e : t.energy) worst = std::max(worst, std::abs(e.total() - e0));
    EXPECT_LT(worst / std::abs(e0), 1e-3) << plant.name();
  }
}

TEST(Systems, ControllerIdleAtTargetEnergy) {
  for (const Plant& plant : kPlants) {
    const SwingUpConfig cfg = SwingUpConfig::defaults(plant.kind());
    // Upright at rest: pendulum energy equals the target.
    const std::vector<double> q{0.0, std::numbers::pi}, qd{0.0, 0.0};
    EXPECT_NEAR(plant.pendulum_energy(q, qd), plant.upright_energy(), 1e-15);
    EXPECT_EQ(swingup_law(plant, cfg, q, qd), 0.0);
  }
}

TEST(Systems, ControllerInjectsEnergyFromRest) {
  for (const Plant& plant : kPlants) {
    const SwingUpConfig cfg = SwingUpConfig::defaults(plant.kind());
    SwingUpController ctl(plant, cfg);
    const PlantModel model(plant);
    State s{{0.0, 0.0}, {0.0, 0.0}};
    const double e0 = plant.pendulum_energy(s.q, s.qd);
    for (int k = 0; k < 5; ++k) {
      const auto u = ctl(k * kDefaultDt, s.q, s.qd);
      EXPECT_NE(u[0], 0.0);
      EXPECT_EQ(u[1], 0.0);
      s = *rk4_step(model, s, u, kDefaultDt);
    }
    EXPECT_GT(plant.pendulum_energy(s.q, s.qd), e0) << plant.name();
  }
}

TEST(Systems, ControllerSaturates) {
  for (const Plant& plant : kPlants) {
    const SwingUpConfig cfg = SwingUpConfig::defaults(plant.kind());
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> q{u(rng), u(rng)}, qd{u(rng), u(rng)};
      EXPECT_LE(std::abs(swingup_law(plant, cfg, q, qd)), cfg.max_input);
    }
  }
}

TEST(Systems, SwingUpReachesUpright) {
  for (const Plant& plant : kPlants) {
    SwingUpController ctl(plant, SwingUpConfig::defaults(plant.kind()));
    const PlantModel model(plant);
    const Controller c = [&](double t, const State& s) { return ctl(t, s.q, s.qd); };
    const Trajectory traj = rollout(model, State{{0.0, 0.01}, {0.0, 0.0}}, c, 60.0, {});
    ASSERT_FALSE(traj.diverged);
    double best = 10.0;
    for (const State& s : traj.states) best = std::min(best, std::abs(wrap_angle(s.q[1] - std::numbers::pi)));
    EXPECT_LT(best, 0.2) << plant.name();
  }
}

TEST(Systems, WrapAngle) {
  EXPECT_NEAR(wrap_angle(3 * std::numbers::pi / 2), -std::numbers::pi / 2, 1e-15);
  EXPECT_NEAR(wrap_angle(-std::numbers::pi), std::numbers::pi, 1e-15);
  EXPECT_EQ(wrap_angle(0.5), 0.5);
}

TEST(Systems, PlantJsonRoundTrip) {
  FurutaParams p;
  p.arm_mass = 0.2;
  const Plant a = Plant::furuta(p);
  const Plant b = Plant::from_json(a.to_json());
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(b.furuta_params().arm_mass, 0.2);
  EXPECT_NE(a.hash(), Plant::furuta().hash());
  EXPECT_EQ(system_kind_from_string("cartpole"), SystemKind::kCartpole);
}

}  // namespace
}  // namespace diffnea
