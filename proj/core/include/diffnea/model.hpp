#pragma once

// Kinematic trees and the virtual-parameter maps.
//
// Every link carries 16 unconstrained virtual parameters:
//   kinematics  (6): fixed-transform RPY angles and translation
//   inertial   (10): sqrt central second moments (3), sqrt mass,
//                    principal-axis RPY angles (3), centre of mass (3)
// Any real values realize a valid transform and a physically consistent
// rigid-body inertia (non-negative mass, triangle-inequality moments).

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "diffnea/lie.hpp"
#include "diffnea/param_set.hpp"

namespace diffnea {

enum class JointType { kRevolute, kPrismatic };

std::string_view to_string(JointType type);
/// Throws SchemaError for anything other than "revolute" / "prismatic".
JointType joint_type_from_string(std::string_view name);

template <class T>
struct KinParams {
  Vector3<T> rpy = Vector3<T>::Zero();
  Vector3<T> xyz = Vector3<T>::Zero();
};

template <class T>
struct InertialParams {
  Vector3<T> sqrt_moments = Vector3<T>::Zero();  // theta_sqrtL
  T sqrt_mass = T(0.0);
  Vector3<T> principal_rpy = Vector3<T>::Zero();  // orientation of the principal axes
  Vector3<T> com = Vector3<T>::Zero();
};

/// T_O = [R_z R_y R_x, p_k; 0, 1].
template <class T>
Transform<T> fixed_transform(const KinParams<T>& kin) {
  return Transform<T>{rpy_matrix<T>(kin.rpy), kin.xyz};
}

/// Joint motion about / along the local z axis.
template <class T>
Transform<T> joint_transform(JointType type, const T& q) {
  Transform<T> t;
  if (type == JointType::kRevolute) {
    t.rotation = rot_z<T>(q);
  } else {
    t.translation(2) = q;
  }
  return t;
}

template <class T>
SpatialVector<T> joint_screw(JointType type) {
  SpatialVector<T> s = SpatialVector<T>::Zero();
  s(type == JointType::kRevolute ? 5 : 2) = T(1.0);
  return s;
}

template <class T>
struct RealizedInertia {
  T mass;
  Vector3<T> com;
  Vector3<T> principal_moments;  // diagonal of J_p
  Matrix3<T> rotational_com;     // R_J J_p R_J^T
  Matrix3<T> rotational;         // about the link frame origin
  GeneralizedInertia<T> spatial;
};

/// Maps virtual inertial parameters to mass, centre of mass and inertia.
/// The parallel-axis shift uses J_o = J_c - m [p][p], which is positive
/// semidefinite for every m >= 0.
template <class T>
RealizedInertia<T> realize_inertia(const InertialParams<T>& p) {
  RealizedInertia<T> out;
  const T l1 = p.sqrt_moments(0) * p.sqrt_moments(0);
  const T l2 = p.sqrt_moments(1) * p.sqrt_moments(1);
  const T l3 = p.sqrt_moments(2) * p.sqrt_moments(2);
  out.principal_moments = Vector3<T>(l2 + l3, l1 + l3, l1 + l2);
  out.mass = p.sqrt_mass * p.sqrt_mass;
  out.com = p.com;
  const Matrix3<T> r = rpy_matrix<T>(p.principal_rpy);
  out.rotational_com = r * out.principal_moments.asDiagonal() * r.transpose();
  const Matrix3<T> c = skew<T>(p.com);
  out.rotational = out.rotational_com - (c * c) * out.mass;
  out.spatial = GeneralizedInertia<T>{out.mass, p.com * out.mass, out.rotational};
  return out;
}

/// Physical (prior) inertial description of a link.
struct PhysicalInertia {
  double mass = 0.0;
  Eigen::Vector3d com = Eigen::Vector3d::Zero();
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Zero();  // about the CoM, link-frame axes
};

/// Back-solves virtual parameters from physical values. Second moments that
/// would be negative (a prior violating the triangle inequality) are clamped
/// to zero and a message is appended to `warnings`.
InertialParams<double> inertial_params_from_physical(const PhysicalInertia& phys,
                                                     std::vector<std::string>* warnings = nullptr);

/// RPY angles (x, y, z) with R = R_z R_y R_x.
Eigen::Vector3d rpy_from_matrix(const Eigen::Matrix3d& r);

/// Triangle inequalities and non-negativity of the principal moments of a
/// symmetric inertia about the CoM.
bool satisfies_triangle_inequalities(const Eigen::Matrix3d& inertia_com, double tol = 1e-12);

struct Link {
  std::string name;
  int parent = -1;  // -1: base frame
  JointType joint = JointType::kRevolute;
  KinParams<double> kin;
  PhysicalInertia inertial;
  bool learn_kin = true;
  bool learn_inertial = true;
};

/// Immutable ordered tree; parent indices are strictly smaller than the
/// child index.
class KinematicTree {
 public:
  KinematicTree(std::string name, Eigen::Vector3d gravity, std::vector<Link> links);

  /// Schema: {name, gravity:[3], links:[{name, parent, joint, kin:{rpy,xyz},
  /// inertial:{mass, com:[3], inertia:[xx,xy,xz,yy,yz,zz]}, learn_kin, learn_inertial}]}.
  static KinematicTree from_json(const nlohmann::json& doc);
  static KinematicTree load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  const std::string& name() const noexcept { return name_; }
  const Eigen::Vector3d& gravity() const noexcept { return gravity_; }
  const std::vector<Link>& links() const noexcept { return links_; }
  const Link& link(std::size_t i) const { return links_.at(i); }
  std::size_t dof() const noexcept { return links_.size(); }
  const std::vector<int>& children(std::size_t i) const { return children_.at(i); }

 private:
  std::string name_;
  Eigen::Vector3d gravity_;
  std::vector<Link> links_;
  std::vector<std::vector<int>> children_;
};

KinematicTree tree_from_config(const nlohmann::json& doc);

inline constexpr std::size_t kKinParamsPerLink = 6;
inline constexpr std::size_t kInertialParamsPerLink = 10;
inline constexpr std::size_t kParamsPerLink = kKinParamsPerLink + kInertialParamsPerLink;

/// Location of a tree's virtual parameters inside a ParamSet.
struct TreeParamLayout {
  std::size_t offset = 0;
  std::size_t links = 0;

  std::size_t size() const noexcept { return links * kParamsPerLink; }
  std::size_t kin_offset(std::size_t link) const { return offset + link * kParamsPerLink; }
  std::size_t inertial_offset(std::size_t link) const {
    return kin_offset(link) + kKinParamsPerLink;
  }
};

/// Parameter names of one link, in layout order.
std::array<std::string, kParamsPerLink> link_param_names(std::string_view link);

/// Virtual values corresponding to the tree's priors.
std::vector<double> prior_tree_values(const KinematicTree& tree,
                                      std::vector<std::string>* warnings = nullptr);

/// Appends the tree's parameters (initialized from the priors).
TreeParamLayout add_tree_params(const KinematicTree& tree, ParamSet& params,
                                std::vector<std::string>* warnings = nullptr);

template <class T>
struct TreeParams {
  std::vector<KinParams<T>> kin;
  std::vector<InertialParams<T>> inertial;
};

template <class T>
TreeParams<T> unpack_tree_params(std::span<const T> values, const TreeParamLayout& layout) {
  TreeParams<T> out;
  out.kin.resize(layout.links);
  out.inertial.resize(layout.links);
  for (std::size_t i = 0; i < layout.links; ++i) {
    const T* k = values.data() + layout.kin_offset(i);
    out.kin[i].rpy = Vector3<T>(k[0], k[1], k[2]);
    out.kin[i].xyz = Vector3<T>(k[3], k[4], k[5]);
    const T* m = values.data() + layout.inertial_offset(i);
    out.inertial[i].sqrt_moments = Vector3<T>(m[0], m[1], m[2]);
    out.inertial[i].sqrt_mass = m[3];
    out.inertial[i].principal_rpy = Vector3<T>(m[4], m[5], m[6]);
    out.inertial[i].com = Vector3<T>(m[7], m[8], m[9]);
  }
  return out;
}

template <class T>
struct RealizedLink {
  JointType joint = JointType::kRevolute;
  int parent = -1;
  Transform<T> fixed;
  GeneralizedInertia<T> inertia;
};

/// Everything the recursive algorithms need, with parameters already mapped
/// to transforms and spatial inertias.
template <class T>
struct RealizedTree {
  Vector3<T> gravity = Vector3<T>::Zero();
  std::vector<RealizedLink<T>> links;
  std::vector<std::vector<int>> children;
  std::vector<std::string> names;

  std::size_t dof() const noexcept { return links.size(); }
};

template <class T>
RealizedTree<T> realize_tree(const KinematicTree& tree, const TreeParams<T>& params) {
  RealizedTree<T> out;
  for (int k = 0; k < 3; ++k) out.gravity(k) = T(tree.gravity()(k));
  out.links.resize(tree.dof());
  out.children.resize(tree.dof());
  out.names.resize(tree.dof());
  for (std::size_t i = 0; i < tree.dof(); ++i) {
    const Link& link = tree.link(i);
    out.links[i].joint = link.joint;
    out.links[i].parent = link.parent;
    out.links[i].fixed = fixed_transform<T>(params.kin[i]);
    out.links[i].inertia = realize_inertia<T>(params.inertial[i]).spatial;
    out.children[i] = tree.children(i);
    out.names[i] = link.name;
  }
  return out;
}

template <class T>
RealizedTree<T> realize_tree(const KinematicTree& tree, std::span<const T> values,
                             const TreeParamLayout& layout) {
  return realize_tree(tree, unpack_tree_params<T>(values, layout));
}

/// The tree realized directly from its physical priors (no virtual round trip).
RealizedTree<double> realize_prior_tree(const KinematicTree& tree);

}  // namespace diffnea
