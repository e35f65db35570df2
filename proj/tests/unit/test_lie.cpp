#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "diffnea/lie.hpp"
#include "diffnea/param_set.hpp"

namespace diffnea {
namespace {

using Vec3 = Eigen::Vector3d;
using Vec6 = SpatialVector<double>;
using Mat6 = SpatialMatrix<double>;

struct Rng {
  std::mt19937_64 gen{42};
  std::uniform_real_distribution<double> u{-1.0, 1.0};
  double operator()() { return u(gen); }
  Vec3 vec3() { return Vec3(u(gen), u(gen), u(gen)); }
  Vec6 vec6() {
    Vec6 v;
    for (int i = 0; i < 6; ++i) v(i) = u(gen);
    return v;
  }
  Transform<double> transform() {
    return Transform<double>{rpy_matrix<double>(3.0 * vec3()), vec3()};
  }
  /// Physical spatial inertia: random mass, CoM and PSD rotational part.
  GeneralizedInertia<double> inertia() {
    const double m = 0.5 + std::abs(u(gen));
    const Vec3 c = vec3();
    Eigen::Matrix3d a = Eigen::Matrix3d::Random();
    const Eigen::Matrix3d jc = a * a.transpose() + 0.1 * Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d s = skew<double>(c);
    return GeneralizedInertia<double>::from_com(m, c, jc - m * s * s);
  }
};

TEST(Lie, SkewExamples) {
  EXPECT_TRUE(skew<double>(Vec3::Zero()).isZero());
  EXPECT_TRUE((skew<double>(Vec3(1, 0, 0)) * Vec3(0, 1, 0)).isApprox(Vec3(0, 0, 1)));
}

TEST(Lie, SkewMatchesCrossProduct) {
  Rng r;
  for (int k = 0; k < 50; ++k) {
    const Vec3 x = r.vec3(), y = r.vec3();
    EXPECT_LT((skew<double>(x) * y - x.cross(y)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Lie, ComposeAndInverse) {
  Rng r;
  const Transform<double> id;
  for (int k = 0; k < 50; ++k) {
    const Transform<double> a = r.transform(), b = r.transform();
    const Transform<double> ia = compose(id, a);
    EXPECT_TRUE(ia.rotation.isApprox(a.rotation) && ia.translation.isApprox(a.translation));
    const Transform<double> back = inverse(inverse(a));
    EXPECT_LT((back.homogeneous() - a.homogeneous()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(((a * b).homogeneous() - a.homogeneous() * b.homogeneous()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE((a * b).is_valid());
  }
}

TEST(Lie, AdjointOfIdentity) {
  EXPECT_TRUE(adjoint(Transform<double>::identity()).isIdentity());
}

TEST(Lie, AdjointIsAHomomorphism) {
  Rng r;
  for (int k = 0; k < 50; ++k) {
    const Transform<double> a = r.transform(), b = r.transform();
    EXPECT_LT((adjoint(a * b) - adjoint(a) * adjoint(b)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Lie, PowerIsFrameInvariant) {
  Rng r;
  for (int k = 0; k < 50; ++k) {
    const Transform<double> t = r.transform();
    const Vec6 f = r.vec6(), v = r.vec6();
    const double p = (coadjoint(t) * f).dot(adjoint(t.inverse()) * v);
    EXPECT_NEAR(p, f.dot(v), 1e-12);
  }
}

TEST(Lie, AdjointMapsPointVelocities) {
  // A twist in the child frame, moved to the parent, predicts the same
  // velocity of a material point.
  Rng r;
  const Transform<double> t = r.transform();
  const Vec6 v = r.vec6();
  const Vec3 point_child = r.vec3();
  const Vec3 vel_child = linear_part<double>(v) + angular_part<double>(v).cross(point_child);
  const Vec6 vp = adjoint(t) * v;
  const Vec3 point_parent = t.apply(point_child);
  const Vec3 vel_parent = linear_part<double>(vp) + angular_part<double>(vp).cross(point_parent);
  EXPECT_LT((vel_parent - t.rotation * vel_child).norm(), 1e-12);
}

TEST(Lie, AdStarOfZero) { EXPECT_TRUE(ad_star<double>(Vec6::Zero()).isZero()); }

TEST(Lie, AdStarBlockStructure) {
  Rng r;
  for (int k = 0; k < 20; ++k) {
    const Vec6 v = r.vec6();
    Mat6 hand = Mat6::Zero();
    const Vec3 lin = v.head<3>(), ang = v.tail<3>();
    hand.topLeftCorner<3, 3>() = skew<double>(ang);
    hand.bottomLeftCorner<3, 3>() = skew<double>(lin);
    hand.bottomRightCorner<3, 3>() = skew<double>(ang);
    EXPECT_EQ(ad_star<double>(v), hand);
    EXPECT_EQ(ad_star<double>(v), (-ad<double>(v)).transpose());
    const Vec6 f = r.vec6();
    EXPECT_LT((ad_star<double>(v) * f - ad_star_apply<double>(v, f)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((ad<double>(v) * f - ad_apply<double>(v, f)).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Lie, AdStarEnergyRateIdentity) {
  Rng r;
  for (int k = 0; k < 50; ++k) {
    const Vec6 v = r.vec6();
    Mat6 a = Mat6::Random();
    const Mat6 m = a * a.transpose();
    EXPECT_NEAR(v.dot(ad_star<double>(v) * (m * v)), 0.0, 1e-10);
  }
}

TEST(Lie, GeneralizedInertiaMatrixIsSymmetricPsd) {
  Rng r;
  for (int k = 0; k < 20; ++k) {
    const GeneralizedInertia<double> g = r.inertia();
    const Mat6 m = g.matrix();
    EXPECT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-14);
    Eigen::SelfAdjointEigenSolver<Mat6> es(m);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-12);
    const Vec6 v = r.vec6();
    EXPECT_LT((m * v - g.apply(v)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Lie, NewtonEulerWithoutVelocity) {
  Rng r;
  const GeneralizedInertia<double> g = r.inertia();
  const Vec6 a = r.vec6();
  EXPECT_LT((newton_euler_force<double>(g, Vec6::Zero(), a) - g.matrix() * a).norm(), 1e-14);
}

TEST(Lie, NewtonEulerPointMassMomentum) {
  // Point mass at the origin moving with pure linear velocity: no force,
  // and the moment of the momentum about the origin is zero as well.
  GeneralizedInertia<double> g;
  g.mass = 2.0;
  Vec6 v = Vec6::Zero();
  v.head<3>() = Vec3(1.0, -0.5, 0.25);
  const Vec6 f = newton_euler_force<double>(g, v, Vec6::Zero());
  EXPECT_LT(f.norm(), 1e-15);

  // Rotating frame: mass at p on a frame spinning with w; the body-frame
  // force equals the centripetal force m w x (w x p).
  const Vec3 p(0.3, 0.0, 0.0), w(0.0, 0.0, 2.0);
  GeneralizedInertia<double> h = GeneralizedInertia<double>::from_com(1.5, p, -1.5 * skew<double>(p) * skew<double>(p));
  Vec6 tw = Vec6::Zero();
  tw.tail<3>() = w;
  const Vec6 fc = newton_euler_force<double>(h, tw, Vec6::Zero());
  const Vec3 expected = 1.5 * w.cross(w.cross(p));
  EXPECT_LT((fc.head<3>() - expected).norm(), 1e-14);
  EXPECT_LT((fc.tail<3>() - p.cross(expected)).norm(), 1e-14);
}

TEST(Lie, NewtonEulerMatchesMomentumDerivative) {
  // Body frame moving with twist v(t); the world-frame momentum derivative,
  // pulled back to the body, equals M a + ad*_v M v.
  Rng r;
  const GeneralizedInertia<double> g = r.inertia();
  const Vec6 v0 = r.vec6(), a = r.vec6();
  auto twist = [&](double t) { Vec6 v = v0 + a * t; return v; };
  // Integrate the body pose with small steps to get T(t) around t = 0.5.
  auto pose_at = [&](double t_end) {
    Transform<double> t;
    const int steps = 20000;
    const double h = t_end / steps;
    for (int k = 0; k < steps; ++k) {
      const Vec6 v = twist((k + 0.5) * h);
      const Vec3 w = v.tail<3>() * h, dp = v.head<3>() * h;
      const double th = w.norm();
      Eigen::Matrix3d dr = Eigen::Matrix3d::Identity();
      if (th > 0) dr = Eigen::AngleAxisd(th, w / th).toRotationMatrix();
      t = t * Transform<double>{dr, dp};
    }
    return t;
  };
  const double t0 = 0.5, dt = 1e-3;
  auto world_momentum = [&](double t) {
    return Vec6(coadjoint(pose_at(t).inverse()) * (g.matrix() * twist(t)));
  };
  const Vec6 dh = (world_momentum(t0 + dt) - world_momentum(t0 - dt)) / (2 * dt);
  const Vec6 body = coadjoint(pose_at(t0)) * dh;
  const Vec6 f = newton_euler_force<double>(g, twist(t0), a);
  EXPECT_LT((body - f).norm() / f.norm(), 1e-4);
}

TEST(Lie, OperationsAreDifferentiable) {
  // d/d(angle) of a scalar built from adjoint, coadjoint and inertia.
  Rng r;
  const Vec6 f = r.vec6(), v = r.vec6();
  const Vec3 p = r.vec3();
  auto scalar = [&](auto angle, auto mass) {
    using T = decltype(angle);
    Transform<T> t{rpy_matrix<T>(Vector3<T>(angle, T(0.3), T(-0.2))), p.cast<T>()};
    GeneralizedInertia<T> g;
    g.mass = mass;
    g.first_moment = Vector3<T>(T(0.1), T(0.0), T(0.2)) * mass;
    g.rotational = Matrix3<T>::Identity() * mass;
    const SpatialVector<T> vv = adjoint<T>(t) * v.cast<T>();
    return (coadjoint<T>(t) * f.cast<T>()).dot(newton_euler_force<T>(g, vv, vv));
  };
  Tape::active().clear();
  ParamSet ps;
  ps.add("angle", 0.4);
  ps.add("mass", 1.3);
  const auto e = ps.bind();
  const auto grad = gradient(scalar(e[0], e[1]), ps);
  const double h = 1e-6;
  const double fd0 = (scalar(0.4 + h, 1.3) - scalar(0.4 - h, 1.3)) / (2 * h);
  const double fd1 = (scalar(0.4, 1.3 + h) - scalar(0.4, 1.3 - h)) / (2 * h);
  EXPECT_NEAR(grad[0], fd0, 1e-5 * std::max(1.0, std::abs(fd0)));
  EXPECT_NEAR(grad[1], fd1, 1e-5 * std::max(1.0, std::abs(fd1)));
}

}  // namespace
}  // namespace diffnea
