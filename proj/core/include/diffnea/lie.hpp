#pragma once

// SE(3) / DSE(3) primitives.
//
// Spatial vectors are stored linear-first: a twist is [v; w], a wrench is
// [f; n]. All 6x6 operators below use that ordering. Everything is templated
// on the scalar so the same code runs on double and on DiffScalar.

#include <cmath>

#include <Eigen/Core>

#include "diffnea/scalar.hpp"

namespace diffnea {

template <class T>
using Vector3 = Eigen::Matrix<T, 3, 1>;
template <class T>
using Matrix3 = Eigen::Matrix<T, 3, 3>;
template <class T>
using Matrix4 = Eigen::Matrix<T, 4, 4>;
template <class T>
using SpatialVector = Eigen::Matrix<T, 6, 1>;
template <class T>
using SpatialMatrix = Eigen::Matrix<T, 6, 6>;

template <class T>
Vector3<T> linear_part(const SpatialVector<T>& x) {
  return x.template head<3>();
}

template <class T>
Vector3<T> angular_part(const SpatialVector<T>& x) {
  return x.template tail<3>();
}

template <class T>
SpatialVector<T> spatial(const Vector3<T>& linear, const Vector3<T>& angular) {
  SpatialVector<T> out;
  out << linear, angular;
  return out;
}

template <class T>
Vector3<T> cross(const Vector3<T>& a, const Vector3<T>& b) {
  return Vector3<T>(a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0));
}

/// [x] such that [x] y = x cross y.
template <class T>
Matrix3<T> skew(const Vector3<T>& x) {
  Matrix3<T> m;
  m << T(0.0), -x(2), x(1),
       x(2), T(0.0), -x(0),
       -x(1), x(0), T(0.0);
  return m;
}

template <class T>
Matrix3<T> rot_x(const T& angle) {
  using std::cos;
  using std::sin;
  const T c = cos(angle);
  const T s = sin(angle);
  Matrix3<T> r;
  r << T(1.0), T(0.0), T(0.0),
       T(0.0), c, -s,
       T(0.0), s, c;
  return r;
}

template <class T>
Matrix3<T> rot_y(const T& angle) {
  using std::cos;
  using std::sin;
  const T c = cos(angle);
  const T s = sin(angle);
  Matrix3<T> r;
  r << c, T(0.0), s,
       T(0.0), T(1.0), T(0.0),
       -s, T(0.0), c;
  return r;
}

template <class T>
Matrix3<T> rot_z(const T& angle) {
  using std::cos;
  using std::sin;
  const T c = cos(angle);
  const T s = sin(angle);
  Matrix3<T> r;
  r << c, -s, T(0.0),
       s, c, T(0.0),
       T(0.0), T(0.0), T(1.0);
  return r;
}

/// R_z(rpy.z) R_y(rpy.y) R_x(rpy.x).
template <class T>
Matrix3<T> rpy_matrix(const Vector3<T>& rpy) {
  return rot_z(rpy(2)) * rot_y(rpy(1)) * rot_x(rpy(0));
}

/// Rigid transform (R, p): maps child-frame coordinates into the parent frame.
template <class T>
struct Transform {
  Matrix3<T> rotation = Matrix3<T>::Identity();
  Vector3<T> translation = Vector3<T>::Zero();

  static Transform identity() { return Transform{}; }

  Transform operator*(const Transform& rhs) const {
    return Transform{rotation * rhs.rotation, rotation * rhs.translation + translation};
  }

  Transform inverse() const {
    Matrix3<T> rt = rotation.transpose();
    return Transform{rt, -(rt * translation)};
  }

  Vector3<T> apply(const Vector3<T>& point) const { return rotation * point + translation; }

  Matrix4<T> homogeneous() const {
    Matrix4<T> h = Matrix4<T>::Identity();
    h.template topLeftCorner<3, 3>() = rotation;
    h.template topRightCorner<3, 1>() = translation;
    return h;
  }

  /// Orthonormality and det(R) = +1 within `tol` (double values only).
  bool is_valid(double tol = 1e-9) const {
    Eigen::Matrix3d r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = value_of(rotation(i, j));
    return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(r.determinant() - 1.0) <= tol;
  }
};

template <class T>
Transform<T> compose(const Transform<T>& a, const Transform<T>& b) {
  return a * b;
}

template <class T>
Transform<T> inverse(const Transform<T>& t) {
  return t.inverse();
}

/// Ad_T = [R, [p]R; 0, R]: carries a twist from the child frame into the parent frame.
template <class T>
SpatialMatrix<T> adjoint(const Transform<T>& t) {
  SpatialMatrix<T> ad = SpatialMatrix<T>::Zero();
  ad.template topLeftCorner<3, 3>() = t.rotation;
  ad.template topRightCorner<3, 3>() = skew(t.translation) * t.rotation;
  ad.template bottomRightCorner<3, 3>() = t.rotation;
  return ad;
}

/// Ad*_T = Ad_T^T. Carries wrenches in the opposite direction to adjoint(T).
template <class T>
SpatialMatrix<T> coadjoint(const Transform<T>& t) {
  return adjoint(t).transpose();
}

/// ad_v = [[w], [v]; 0, [w]] (the motion cross product v x).
template <class T>
SpatialMatrix<T> ad(const SpatialVector<T>& v) {
  SpatialMatrix<T> m = SpatialMatrix<T>::Zero();
  const Matrix3<T> w = skew<T>(angular_part(v));
  m.template topLeftCorner<3, 3>() = w;
  m.template topRightCorner<3, 3>() = skew<T>(linear_part(v));
  m.template bottomRightCorner<3, 3>() = w;
  return m;
}

/// ad*_v = [[w], 0; [v], [w]] (the force cross product v x*).
template <class T>
SpatialMatrix<T> ad_star(const SpatialVector<T>& v) {
  SpatialMatrix<T> m = SpatialMatrix<T>::Zero();
  const Matrix3<T> w = skew<T>(angular_part(v));
  m.template topLeftCorner<3, 3>() = w;
  m.template bottomLeftCorner<3, 3>() = skew<T>(linear_part(v));
  m.template bottomRightCorner<3, 3>() = w;
  return m;
}

/// ad_v x without forming the matrix.
template <class T>
SpatialVector<T> ad_apply(const SpatialVector<T>& v, const SpatialVector<T>& x) {
  const Vector3<T> w = angular_part(v);
  const Vector3<T> lin = linear_part(v);
  return spatial<T>(cross<T>(w, linear_part(x)) + cross<T>(lin, angular_part(x)),
                    cross<T>(w, angular_part(x)));
}

/// ad*_v f without forming the matrix.
template <class T>
SpatialVector<T> ad_star_apply(const SpatialVector<T>& v, const SpatialVector<T>& f) {
  const Vector3<T> w = angular_part(v);
  const Vector3<T> fl = linear_part(f);
  return spatial<T>(cross<T>(w, fl), cross<T>(linear_part(v), fl) + cross<T>(w, angular_part(f)));
}

/// Rigid-body spatial inertia about a body frame origin.
///
/// Stored as mass m, first moment h = m p_m and rotational inertia J about the
/// frame origin. In the linear-first ordering the 6x6 matrix is
///   [ m I      m[p_m]^T ]
///   [ m[p_m]   J        ]
/// All three are kept independent so that non-physical combinations (the unit
/// basis inertias used by regression) remain representable.
template <class T>
struct GeneralizedInertia {
  T mass = T(0.0);
  Vector3<T> first_moment = Vector3<T>::Zero();
  Matrix3<T> rotational = Matrix3<T>::Zero();

  static GeneralizedInertia from_com(const T& m, const Vector3<T>& com, const Matrix3<T>& j_origin) {
    return GeneralizedInertia{m, com * m, j_origin};
  }

  SpatialMatrix<T> matrix() const {
    SpatialMatrix<T> out = SpatialMatrix<T>::Zero();
    const Matrix3<T> h = skew(first_moment);
    out.template topLeftCorner<3, 3>() = Matrix3<T>::Identity() * mass;
    out.template topRightCorner<3, 3>() = -h;
    out.template bottomLeftCorner<3, 3>() = h;
    out.template bottomRightCorner<3, 3>() = rotational;
    return out;
  }

  /// M v without forming the matrix.
  SpatialVector<T> apply(const SpatialVector<T>& v) const {
    const Vector3<T> lin = linear_part(v);
    const Vector3<T> ang = angular_part(v);
    return spatial<T>(lin * mass - cross<T>(first_moment, ang),
                      cross<T>(first_moment, lin) + rotational * ang);
  }
};

/// f = M a + ad*_v (M v): rate of change of body momentum seen in the body frame.
template <class T>
SpatialVector<T> newton_euler_force(const SpatialMatrix<T>& inertia, const SpatialVector<T>& v,
                                    const SpatialVector<T>& a) {
  return inertia * a + ad_star_apply<T>(v, inertia * v);
}

template <class T>
SpatialVector<T> newton_euler_force(const GeneralizedInertia<T>& inertia, const SpatialVector<T>& v,
                                    const SpatialVector<T>& a) {
  return inertia.apply(a) + ad_star_apply<T>(v, inertia.apply(v));
}

}  // namespace diffnea
