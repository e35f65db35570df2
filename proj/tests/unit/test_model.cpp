#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "diffnea/errors.hpp"
#include "diffnea/model.hpp"
#include "diffnea/systems.hpp"

namespace diffnea {
namespace {

nlohmann::json pendulum_config() {
  return nlohmann::json::parse(R"({
    "name": "pendulum",
    "gravity": [0, 0, -9.81],
    "links": [{"name": "rod", "parent": null, "joint": "revolute",
               "kin": {"rpy": [1.5707963267948966, 0, 0], "xyz": [0, 0, 0]},
               "inertial": {"mass": 1.0, "com": [0, -1, 0], "inertia": [0, 0, 0, 0, 0, 0]}}]
  })");
}

TEST(Model, FixedTransformExamples) {
  const Transform<double> id = fixed_transform<double>(KinParams<double>{});
  EXPECT_TRUE(id.rotation.isIdentity() && id.translation.isZero());
  KinParams<double> k;
  k.rpy = Eigen::Vector3d(0, 0, std::numbers::pi / 2);
  EXPECT_LT((fixed_transform<double>(k).rotation * Eigen::Vector3d::UnitX() - Eigen::Vector3d::UnitY()).norm(), 1e-15);
}

TEST(Model, RpyMatchesElementaryRotations) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d a(u(rng), u(rng), u(rng));
    const Eigen::Matrix3d expected = (Eigen::AngleAxisd(a(2), Eigen::Vector3d::UnitZ()) *
                                      Eigen::AngleAxisd(a(1), Eigen::Vector3d::UnitY()) *
                                      Eigen::AngleAxisd(a(0), Eigen::Vector3d::UnitX()))
                                         .toRotationMatrix();
    EXPECT_LT((rpy_matrix<double>(a) - expected).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_TRUE(fixed_transform<double>(KinParams<double>{a, Eigen::Vector3d(u(rng), 0, 1)}).is_valid());
    EXPECT_LT((rpy_matrix<double>(rpy_from_matrix(expected)) - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Model, JointTransforms) {
  EXPECT_TRUE(joint_transform<double>(JointType::kRevolute, 0.0).rotation.isIdentity());
  const Transform<double> p = joint_transform<double>(JointType::kPrismatic, 0.3);
  EXPECT_TRUE(p.rotation.isIdentity());
  EXPECT_TRUE(p.translation.isApprox(Eigen::Vector3d(0, 0, 0.3)));
}

TEST(Model, JointDerivativeIsTheScrew) {
  // d/dq T(q) expressed in the moving frame equals the joint screw.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (const JointType type : {JointType::kRevolute, JointType::kPrismatic}) {
    for (int i = 0; i < 20; ++i) {
      const double q = u(rng), h = 1e-6;
      const Eigen::Matrix4d d = (joint_transform<double>(type, q + h).homogeneous() -
                                 joint_transform<double>(type, q - h).homogeneous()) /
                                (2 * h);
      const Eigen::Matrix4d body = joint_transform<double>(type, q).inverse().homogeneous() * d;
      const SpatialVector<double> s = joint_screw<double>(type);
      Eigen::Matrix4d hat = Eigen::Matrix4d::Zero();
      hat.topLeftCorner<3, 3>() = skew<double>(s.tail<3>());
      hat.topRightCorner<3, 1>() = s.head<3>();
      EXPECT_LT((body - hat).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(Model, RealizeInertiaExamples) {
  InertialParams<double> p;
  p.sqrt_mass = 1.0;
  const RealizedInertia<double> point = realize_inertia<double>(p);
  EXPECT_EQ(point.mass, 1.0);
  EXPECT_TRUE(point.rotational.isZero());
  SpatialMatrix<double> expected = SpatialMatrix<double>::Zero();
  expected.topLeftCorner<3, 3>().setIdentity();
  EXPECT_EQ(point.spatial.matrix(), expected);

  InertialParams<double> s;
  s.sqrt_moments = Eigen::Vector3d::Constant(0.7);
  s.sqrt_mass = 1.0;
  EXPECT_LT((realize_inertia<double>(s).rotational_com - 2 * 0.49 * Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(),
            1e-15);
}

TEST(Model, RandomVirtualParametersArePlausible) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    InertialParams<double> p;
    p.sqrt_moments = Eigen::Vector3d(n(rng), n(rng), n(rng));
    p.sqrt_mass = n(rng);
    p.principal_rpy = Eigen::Vector3d(n(rng), n(rng), n(rng));
    p.com = Eigen::Vector3d(n(rng), n(rng), n(rng));
    const RealizedInertia<double> r = realize_inertia<double>(p);
    EXPECT_GE(r.mass, 0.0);
    EXPECT_TRUE(satisfies_triangle_inequalities(r.rotational_com, 1e-12));
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(r.rotational);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-9 * std::max(1.0, eig.eigenvalues().maxCoeff()));
    const Eigen::SelfAdjointEigenSolver<SpatialMatrix<double>> es(r.spatial.matrix());
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9 * std::max(1.0, es.eigenvalues().maxCoeff()));
  }
}

TEST(Model, PriorBackSolveRoundTrip) {
  PhysicalInertia phys;
  phys.mass = 0.8;
  phys.com = Eigen::Vector3d(0.1, -0.2, 0.05);
  const Eigen::Matrix3d r = rpy_matrix<double>(Eigen::Vector3d(0.3, -0.4, 1.1));
  phys.inertia = r * Eigen::Vector3d(0.02, 0.03, 0.04).asDiagonal() * r.transpose();
  std::vector<std::string> warnings;
  const RealizedInertia<double> back = realize_inertia<double>(inertial_params_from_physical(phys, &warnings));
  EXPECT_TRUE(warnings.empty());
  EXPECT_NEAR(back.mass, 0.8, 1e-15);
  EXPECT_LT((back.com - phys.com).norm(), 1e-15);
  EXPECT_LT((back.rotational_com - phys.inertia).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Model, ImplausiblePriorIsClampedWithWarning) {
  PhysicalInertia phys;
  phys.mass = 1.0;
  phys.inertia = Eigen::Vector3d(1.0, 0.1, 0.1).asDiagonal();
  std::vector<std::string> warnings;
  const RealizedInertia<double> back = realize_inertia<double>(inertial_params_from_physical(phys, &warnings));
  EXPECT_FALSE(warnings.empty());
  EXPECT_TRUE(satisfies_triangle_inequalities(back.rotational_com));
}

TEST(Model, ParallelAxisShift) {
  InertialParams<double> p;
  p.sqrt_mass = std::sqrt(2.0);
  p.com = Eigen::Vector3d(0.0, 0.5, 0.0);
  const RealizedInertia<double> r = realize_inertia<double>(p);
  // Point mass 2 at y = 0.5: J_xx = J_zz = m y^2, J_yy = 0.
  EXPECT_LT((r.rotational - Eigen::Vector3d(0.5, 0.0, 0.5).asDiagonal().toDenseMatrix()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Model, PendulumConfig) {
  const KinematicTree tree = tree_from_config(pendulum_config());
  EXPECT_EQ(tree.dof(), 1u);
  EXPECT_EQ(tree.link(0).joint, JointType::kRevolute);
  EXPECT_EQ(tree.link(0).parent, -1);
}

TEST(Model, BenchmarkTrees) {
  const KinematicTree cp = cartpole_tree({});
  ASSERT_EQ(cp.dof(), 2u);
  EXPECT_EQ(cp.link(0).joint, JointType::kPrismatic);
  EXPECT_EQ(cp.link(1).joint, JointType::kRevolute);
  EXPECT_EQ(cp.link(1).parent, 0);
  const KinematicTree fu = furuta_tree({});
  ASSERT_EQ(fu.dof(), 2u);
  EXPECT_EQ(fu.link(0).joint, JointType::kRevolute);
  EXPECT_EQ(fu.link(1).joint, JointType::kRevolute);
  EXPECT_NEAR(std::abs(fu.link(1).kin.rpy(1)), std::numbers::pi / 2, 1e-15);
}

TEST(Model, JsonRoundTrip) {
  const KinematicTree a = furuta_tree({});
  const KinematicTree b = KinematicTree::from_json(a.to_json());
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(Model, SchemaErrors) {
  auto doc = pendulum_config();
  doc["links"][0]["joint"] = "spherical";
  EXPECT_THROW(tree_from_config(doc), SchemaError);

  doc = pendulum_config();
  doc["links"][0]["parent"] = "rod";
  EXPECT_THROW(tree_from_config(doc), SchemaError);

  doc = pendulum_config();
  doc["links"].push_back(doc["links"][0]);
  EXPECT_THROW(tree_from_config(doc), SchemaError);

  doc = pendulum_config();
  nlohmann::json child = doc["links"][0];
  child["name"] = "child";
  child["parent"] = "later";
  nlohmann::json later = doc["links"][0];
  later["name"] = "later";
  doc["links"] = {child, later};
  EXPECT_THROW(tree_from_config(doc), SchemaError);

  doc = pendulum_config();
  doc["links"][0]["inertial"]["mass"] = -1.0;
  EXPECT_THROW(tree_from_config(doc), SchemaError);

  EXPECT_THROW(tree_from_config(nlohmann::json::array()), SchemaError);
}

TEST(Model, ParamLayoutAndNames) {
  const KinematicTree tree = cartpole_tree({});
  ParamSet ps;
  const TreeParamLayout layout = add_tree_params(tree, ps);
  EXPECT_EQ(layout.size(), 32u);
  EXPECT_EQ(ps.size(), 32u);
  EXPECT_EQ(ps.name(layout.kin_offset(1)), "pole.rpy.x");
  EXPECT_EQ(ps.name(layout.inertial_offset(0) + 3), "cart.sqrt_mass");
  const auto names = link_param_names("pole");
  EXPECT_EQ(names.size(), kParamsPerLink);
  // Priors realize the physical tree.
  const RealizedTree<double> a = realize_tree<double>(tree, ps.values(), layout);
  const RealizedTree<double> b = realize_prior_tree(tree);
  for (std::size_t i = 0; i < tree.dof(); ++i) {
    EXPECT_LT((a.links[i].inertia.matrix() - b.links[i].inertia.matrix()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((a.links[i].fixed.homogeneous() - b.links[i].fixed.homogeneous()).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Model, InertiaGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> theta(kInertialParamsPerLink);
  for (double& t : theta) t = u(rng);
  auto unpack = [](auto* v) {
    using T = std::remove_cv_t<std::remove_pointer_t<decltype(v)>>;
    InertialParams<T> p;
    p.sqrt_moments = Vector3<T>(v[0], v[1], v[2]);
    p.sqrt_mass = v[3];
    p.principal_rpy = Vector3<T>(v[4], v[5], v[6]);
    p.com = Vector3<T>(v[7], v[8], v[9]);
    return realize_inertia<T>(p).spatial.matrix();
  };
  Tape::active().clear();
  ParamSet ps;
  for (std::size_t i = 0; i < theta.size(); ++i) ps.add("t" + std::to_string(i), theta[i]);
  const auto leaves = ps.bind();
  const SpatialMatrix<DiffScalar> m = unpack(leaves.data());
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) {
      if (m(r, c).is_constant()) continue;
      const auto g = gradient(m(r, c), ps);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        std::vector<double> a = theta, b = theta;
        a[i] += 1e-6;
        b[i] -= 1e-6;
        const double fd = (unpack(a.data())(r, c) - unpack(b.data())(r, c)) / 2e-6;
        EXPECT_NEAR(g[i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

}  // namespace
}  // namespace diffnea
