#pragma once

// Forward dynamics (articulated body algorithm) and inverse dynamics
// (recursive Newton-Euler) on a realized kinematic tree.
//
// Gravity enters as a fictitious base acceleration a_0 = [-g; 0], so link
// accelerations reported here include it. Joint frames are indexed so that
// T_{parent,i}(q) = T_O,i * T_q(q_i).

#include <cstddef>
#include <span>
#include <vector>

#include "diffnea/errors.hpp"
#include "diffnea/lie.hpp"
#include "diffnea/model.hpp"

namespace diffnea {

inline constexpr double kSingularInertiaEpsilon = 1e-10;

template <class T>
struct AbaWorkspace {
  std::vector<SpatialMatrix<T>> to_link;  // Ad_{T^-1_{parent,i}}
  std::vector<SpatialVector<T>> velocity;
  std::vector<SpatialVector<T>> bias_acceleration;  // eta_i
  std::vector<SpatialMatrix<T>> lumped_inertia;     // M_{i:n}
  std::vector<SpatialVector<T>> bias_force;         // f_b,i
  std::vector<T> inv_joint_inertia;                 // Psi_i
  std::vector<SpatialMatrix<T>> articulated;        // Pi_i
  std::vector<SpatialVector<T>> beta;
};

template <class T>
struct AbaResult {
  std::vector<T> qdd;
  std::vector<SpatialVector<T>> accelerations;
  std::vector<SpatialVector<T>> forces;
};

template <class T>
struct RneaResult {
  std::vector<T> tau;
  std::vector<SpatialVector<T>> forces;
};

template <class T>
struct Energy {
  T kinetic = T(0.0);
  T potential = T(0.0);
  T total() const { return kinetic + potential; }
};

namespace detail {

inline void check_dims(std::size_t dof, std::size_t a, std::size_t b, std::size_t c) {
  if (a != dof || b != dof || c != dof) {
    throw std::invalid_argument("state dimension does not match tree degrees of freedom");
  }
}

template <class T>
SpatialVector<T> base_acceleration(const RealizedTree<T>& tree) {
  return spatial<T>(Vector3<T>(-tree.gravity), Vector3<T>::Zero());
}

}  // namespace detail

/// Articulated body algorithm. The optional workspace receives the
/// intermediate quantities of the three sweeps.
template <class T>
AbaResult<T> aba_forward(const RealizedTree<T>& tree, std::span<const T> q, std::span<const T> qd,
                         std::span<const T> u, AbaWorkspace<T>* workspace = nullptr) {
  const std::size_t n = tree.dof();
  detail::check_dims(n, q.size(), qd.size(), u.size());

  AbaWorkspace<T> local;
  AbaWorkspace<T>& ws = workspace != nullptr ? *workspace : local;
  ws.to_link.resize(n);
  ws.velocity.resize(n);
  ws.bias_acceleration.resize(n);
  ws.lumped_inertia.resize(n);
  ws.bias_force.resize(n);
  ws.inv_joint_inertia.resize(n);
  ws.articulated.resize(n);
  ws.beta.resize(n);

  std::vector<SpatialVector<T>> screw(n);

  // Forward kinematics.
  for (std::size_t i = 0; i < n; ++i) {
    const RealizedLink<T>& link = tree.links[i];
    screw[i] = joint_screw<T>(link.joint);
    const Transform<T> pose = link.fixed * joint_transform<T>(link.joint, q[i]);
    ws.to_link[i] = adjoint<T>(pose.inverse());
    const SpatialVector<T> joint_velocity = screw[i] * qd[i];
    ws.velocity[i] = link.parent < 0
                         ? joint_velocity
                         : SpatialVector<T>(ws.to_link[i] * ws.velocity[static_cast<std::size_t>(link.parent)] +
                                            joint_velocity);
    ws.bias_acceleration[i] = ad_apply<T>(ws.velocity[i], joint_velocity);
  }

  // Lumped inertias and bias forces, leaves first.
  for (std::size_t i = n; i-- > 0;) {
    const RealizedLink<T>& link = tree.links[i];
    SpatialMatrix<T> lumped = link.inertia.matrix();
    SpatialVector<T> bias = ad_star_apply<T>(ws.velocity[i], link.inertia.apply(ws.velocity[i]));
    for (const int child : tree.children[i]) {
      const auto k = static_cast<std::size_t>(child);
      const SpatialMatrix<T>& x = ws.to_link[k];
      lumped += x.transpose() * ws.articulated[k] * x;
      bias += x.transpose() * (ws.bias_force[k] + ws.beta[k]);
    }
    ws.lumped_inertia[i] = lumped;
    ws.bias_force[i] = bias;

    const SpatialVector<T> ms = lumped * screw[i];
    const T denom = screw[i].dot(ms);
    if (!(value_of(denom) > kSingularInertiaEpsilon)) {
      throw SingularInertiaError(i < tree.names.size() ? tree.names[i] : std::to_string(i), value_of(denom));
    }
    const T psi = T(1.0) / denom;
    ws.inv_joint_inertia[i] = psi;
    ws.articulated[i] = lumped - (ms * psi) * ms.transpose();
    const SpatialVector<T> m_eta = lumped * ws.bias_acceleration[i];
    const T residual = u[i] - screw[i].dot(m_eta + bias);
    ws.beta[i] = m_eta + ms * (psi * residual);
  }

  // Accelerations and joint forces, root first.
  AbaResult<T> out;
  out.qdd.resize(n);
  out.accelerations.resize(n);
  out.forces.resize(n);
  const SpatialVector<T> a0 = detail::base_acceleration(tree);
  for (std::size_t i = 0; i < n; ++i) {
    const int parent = tree.links[i].parent;
    const SpatialVector<T>& a_parent = parent < 0 ? a0 : out.accelerations[static_cast<std::size_t>(parent)];
    const SpatialVector<T> a_pre = ws.to_link[i] * a_parent + ws.bias_acceleration[i];
    const SpatialMatrix<T>& lumped = ws.lumped_inertia[i];
    out.qdd[i] = ws.inv_joint_inertia[i] * (u[i] - screw[i].dot(lumped * a_pre + ws.bias_force[i]));
    out.accelerations[i] = a_pre + screw[i] * out.qdd[i];
    out.forces[i] = lumped * out.accelerations[i] + ws.bias_force[i];
  }
  return out;
}

/// Recursive Newton-Euler inverse dynamics.
template <class T>
RneaResult<T> rnea_inverse(const RealizedTree<T>& tree, std::span<const T> q, std::span<const T> qd,
                           std::span<const T> qdd) {
  const std::size_t n = tree.dof();
  detail::check_dims(n, q.size(), qd.size(), qdd.size());
  std::vector<SpatialVector<T>> v(n), a(n);
  std::vector<SpatialMatrix<T>> to_link(n);
  std::vector<SpatialVector<T>> screw(n);
  RneaResult<T> out;
  out.forces.resize(n);
  out.tau.resize(n);
  const SpatialVector<T> a0 = detail::base_acceleration(tree);
  for (std::size_t i = 0; i < n; ++i) {
    const RealizedLink<T>& link = tree.links[i];
    screw[i] = joint_screw<T>(link.joint);
    to_link[i] = adjoint<T>((link.fixed * joint_transform<T>(link.joint, q[i])).inverse());
    const SpatialVector<T> joint_velocity = screw[i] * qd[i];
    const auto p = static_cast<std::size_t>(link.parent);
    const SpatialVector<T> v_parent = link.parent < 0 ? SpatialVector<T>(SpatialVector<T>::Zero()) : v[p];
    const SpatialVector<T> a_parent = link.parent < 0 ? a0 : a[p];
    v[i] = to_link[i] * v_parent + joint_velocity;
    a[i] = to_link[i] * a_parent + screw[i] * qdd[i] + ad_apply<T>(v[i], joint_velocity);
    out.forces[i] = newton_euler_force<T>(link.inertia, v[i], a[i]);
  }
  for (std::size_t i = n; i-- > 0;) {
    out.tau[i] = screw[i].dot(out.forces[i]);
    const int parent = tree.links[i].parent;
    if (parent >= 0) {
      out.forces[static_cast<std::size_t>(parent)] += to_link[i].transpose() * out.forces[i];
    }
  }
  return out;
}

/// Kinetic energy sum(1/2 v^T M v) and potential energy -sum(m g . c) with
/// the CoM c expressed in the base frame.
template <class T>
Energy<T> total_energy(const RealizedTree<T>& tree, std::span<const T> q, std::span<const T> qd) {
  const std::size_t n = tree.dof();
  detail::check_dims(n, q.size(), qd.size(), n);
  std::vector<Transform<T>> world(n);
  std::vector<SpatialVector<T>> v(n);
  Energy<T> e;
  for (std::size_t i = 0; i < n; ++i) {
    const RealizedLink<T>& link = tree.links[i];
    const Transform<T> local = link.fixed * joint_transform<T>(link.joint, q[i]);
    const SpatialVector<T> joint_velocity = joint_screw<T>(link.joint) * qd[i];
    if (link.parent < 0) {
      world[i] = local;
      v[i] = joint_velocity;
    } else {
      const auto p = static_cast<std::size_t>(link.parent);
      world[i] = world[p] * local;
      v[i] = adjoint<T>(local.inverse()) * v[p] + joint_velocity;
    }
    e.kinetic += T(0.5) * v[i].dot(link.inertia.apply(v[i]));
    // m c_world = R h + m p.
    const Vector3<T> moment_world = world[i].rotation * link.inertia.first_moment +
                                    world[i].translation * link.inertia.mass;
    e.potential -= tree.gravity.dot(moment_world);
  }
  return e;
}

extern template AbaResult<double> aba_forward<double>(const RealizedTree<double>&, std::span<const double>,
                                                      std::span<const double>, std::span<const double>,
                                                      AbaWorkspace<double>*);
extern template AbaResult<DiffScalar> aba_forward<DiffScalar>(const RealizedTree<DiffScalar>&,
                                                              std::span<const DiffScalar>,
                                                              std::span<const DiffScalar>,
                                                              std::span<const DiffScalar>,
                                                              AbaWorkspace<DiffScalar>*);
extern template RneaResult<double> rnea_inverse<double>(const RealizedTree<double>&, std::span<const double>,
                                                        std::span<const double>, std::span<const double>);
extern template RneaResult<DiffScalar> rnea_inverse<DiffScalar>(const RealizedTree<DiffScalar>&,
                                                                std::span<const DiffScalar>,
                                                                std::span<const DiffScalar>,
                                                                std::span<const DiffScalar>);
extern template Energy<double> total_energy<double>(const RealizedTree<double>&, std::span<const double>,
                                                    std::span<const double>);
extern template Energy<DiffScalar> total_energy<DiffScalar>(const RealizedTree<DiffScalar>&,
                                                            std::span<const DiffScalar>,
                                                            std::span<const DiffScalar>);

}  // namespace diffnea
