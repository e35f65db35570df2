#include "diffnea/model.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "diffnea/errors.hpp"

namespace diffnea {

std::string_view to_string(JointType type) {
  return type == JointType::kRevolute ? "revolute" : "prismatic";
}

JointType joint_type_from_string(std::string_view name) {
  if (name == "revolute") return JointType::kRevolute;
  if (name == "prismatic") return JointType::kPrismatic;
  throw SchemaError("", "unknown joint type '" + std::string(name) + "'");
}

Eigen::Vector3d rpy_from_matrix(const Eigen::Matrix3d& r) {
  const double cy = std::hypot(r(2, 1), r(2, 2));
  if (cy < 1e-9) {
    // Gimbal lock: only the sum/difference of roll and yaw is defined.
    return {0.0, std::atan2(-r(2, 0), cy), std::atan2(-r(0, 1), r(1, 1))};
  }
  return {std::atan2(r(2, 1), r(2, 2)), std::atan2(-r(2, 0), cy), std::atan2(r(1, 0), r(0, 0))};
}

bool satisfies_triangle_inequalities(const Eigen::Matrix3d& inertia_com, double tol) {
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(0.5 * (inertia_com + inertia_com.transpose()));
  const Eigen::Vector3d j = eig.eigenvalues();
  const double scale = std::max(1.0, j.cwiseAbs().maxCoeff());
  const double eps = tol * scale;
  return j.minCoeff() >= -eps && j(0) <= j(1) + j(2) + eps && j(1) <= j(0) + j(2) + eps &&
         j(2) <= j(0) + j(1) + eps;
}

InertialParams<double> inertial_params_from_physical(const PhysicalInertia& phys,
                                                     std::vector<std::string>* warnings) {
  InertialParams<double> out;
  if (phys.mass < 0.0) throw SchemaError("", "negative prior mass");
  out.sqrt_mass = std::sqrt(phys.mass);
  out.com = phys.com;

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(
      0.5 * (phys.inertia + phys.inertia.transpose()));
  Eigen::Matrix3d axes = eig.eigenvectors();
  if (axes.determinant() < 0.0) axes.col(2) *= -1.0;
  const Eigen::Vector3d j = eig.eigenvalues();
  out.principal_rpy = rpy_from_matrix(axes);

  // J_x = L2 + L3, J_y = L1 + L3, J_z = L1 + L2.
  const std::array<double, 3> moments = {0.5 * (j(1) + j(2) - j(0)), 0.5 * (j(0) + j(2) - j(1)),
                                         0.5 * (j(0) + j(1) - j(2))};
  for (int i = 0; i < 3; ++i) {
    double l = moments[static_cast<std::size_t>(i)];
    if (l < 0.0) {
      if (warnings != nullptr && l < -1e-15) {
        std::ostringstream msg;
        msg << "prior inertia violates the triangle inequality (L" << (i + 1) << " = " << l
            << "); clamped to 0";
        warnings->push_back(msg.str());
      }
      l = 0.0;
    }
    out.sqrt_moments(i) = std::sqrt(l);
  }
  return out;
}

KinematicTree::KinematicTree(std::string name, Eigen::Vector3d gravity, std::vector<Link> links)
    : name_(std::move(name)), gravity_(std::move(gravity)), links_(std::move(links)) {
  children_.resize(links_.size());
  std::map<std::string, std::size_t, std::less<>> seen;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    const Link& link = links_[i];
    if (link.name.empty()) throw SchemaError("", "link " + std::to_string(i) + " has no name");
    if (!seen.emplace(link.name, i).second) throw SchemaError(link.name, "duplicate link name");
    if (link.parent == static_cast<int>(i)) throw SchemaError(link.name, "link is its own parent (cycle)");
    if (link.parent >= static_cast<int>(i)) {
      throw SchemaError(link.name, "parent must precede the link (non-topological order or cycle)");
    }
    if (link.parent < -1) throw SchemaError(link.name, "invalid parent index");
    if (link.inertial.mass < 0.0) throw SchemaError(link.name, "negative mass");
    if (link.parent >= 0) children_[static_cast<std::size_t>(link.parent)].push_back(static_cast<int>(i));
  }
}

namespace {

Eigen::Vector3d vec3(const nlohmann::json& j, const std::string& link, const char* what) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(link, std::string(what) + " must be an array of 3 numbers");
  Eigen::Vector3d v;
  for (int k = 0; k < 3; ++k) {
    if (!j[static_cast<std::size_t>(k)].is_number()) throw SchemaError(link, std::string(what) + " must be numeric");
    v(k) = j[static_cast<std::size_t>(k)].get<double>();
  }
  return v;
}

}  // namespace

KinematicTree KinematicTree::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SchemaError("", "tree document must be an object");
  if (!doc.contains("links") || !doc["links"].is_array()) throw SchemaError("", "missing 'links' array");
  const std::string name = doc.value("name", std::string("tree"));
  const Eigen::Vector3d gravity =
      doc.contains("gravity") ? vec3(doc["gravity"], "", "gravity") : Eigen::Vector3d(0.0, 0.0, -9.81);

  std::map<std::string, int, std::less<>> index;
  std::vector<std::string> pending_parent;
  std::vector<Link> links;
  for (const auto& item : doc["links"]) {
    if (!item.is_object() || !item.contains("name") || !item["name"].is_string()) {
      throw SchemaError("", "every link needs a string 'name'");
    }
    Link link;
    link.name = item["name"].get<std::string>();
    const int self = static_cast<int>(links.size());

    const auto& parent = item.contains("parent") ? item["parent"] : nlohmann::json();
    if (parent.is_null() || (parent.is_string() && (parent == "" || parent == "base"))) {
      link.parent = -1;
    } else if (parent.is_string()) {
      const auto p = parent.get<std::string>();
      if (p == link.name) throw SchemaError(link.name, "link is its own parent (cycle)");
      const auto it = index.find(p);
      if (it == index.end()) {
        // Either undefined or defined later; both break topological order.
        bool later = false;
        for (const auto& other : doc["links"]) later = later || (other.value("name", "") == p);
        throw SchemaError(link.name, later ? "parent '" + p + "' appears after the link (non-topological order or cycle)"
                                           : "unknown parent '" + p + "'");
      }
      link.parent = it->second;
    } else {
      throw SchemaError(link.name, "'parent' must be a link name or null");
    }

    if (!item.contains("joint") || !item["joint"].is_string()) throw SchemaError(link.name, "missing joint type");
    try {
      link.joint = joint_type_from_string(item["joint"].get<std::string>());
    } catch (const SchemaError& e) {
      throw SchemaError(link.name, e.what());
    }

    if (item.contains("kin")) {
      const auto& kin = item["kin"];
      if (kin.contains("rpy")) link.kin.rpy = vec3(kin["rpy"], link.name, "kin.rpy");
      if (kin.contains("xyz")) link.kin.xyz = vec3(kin["xyz"], link.name, "kin.xyz");
    }
    if (item.contains("inertial")) {
      const auto& in = item["inertial"];
      link.inertial.mass = in.value("mass", 0.0);
      if (in.contains("com")) link.inertial.com = vec3(in["com"], link.name, "inertial.com");
      if (in.contains("inertia")) {
        const auto& t = in["inertia"];
        if (!t.is_array() || t.size() != 6) {
          throw SchemaError(link.name, "inertial.inertia must hold 6 upper-triangular entries");
        }
        const double xx = t[0], xy = t[1], xz = t[2], yy = t[3], yz = t[4], zz = t[5];
        link.inertial.inertia << xx, xy, xz, xy, yy, yz, xz, yz, zz;
      }
    }
    link.learn_kin = item.value("learn_kin", true);
    link.learn_inertial = item.value("learn_inertial", true);
    index.emplace(link.name, self);
    links.push_back(std::move(link));
  }
  return KinematicTree(name, gravity, std::move(links));
}

KinematicTree KinematicTree::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tree config " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  return from_json(doc);
}

nlohmann::json KinematicTree::to_json() const {
  nlohmann::ordered_json doc;
  doc["name"] = name_;
  doc["gravity"] = {gravity_(0), gravity_(1), gravity_(2)};
  doc["links"] = nlohmann::ordered_json::array();
  for (const Link& link : links_) {
    nlohmann::ordered_json j;
    j["name"] = link.name;
    j["parent"] = link.parent < 0 ? nlohmann::ordered_json(nullptr)
                                  : nlohmann::ordered_json(links_[static_cast<std::size_t>(link.parent)].name);
    j["joint"] = std::string(to_string(link.joint));
    j["kin"]["rpy"] = {link.kin.rpy(0), link.kin.rpy(1), link.kin.rpy(2)};
    j["kin"]["xyz"] = {link.kin.xyz(0), link.kin.xyz(1), link.kin.xyz(2)};
    const auto& in = link.inertial;
    j["inertial"]["mass"] = in.mass;
    j["inertial"]["com"] = {in.com(0), in.com(1), in.com(2)};
    j["inertial"]["inertia"] = {in.inertia(0, 0), in.inertia(0, 1), in.inertia(0, 2),
                                in.inertia(1, 1), in.inertia(1, 2), in.inertia(2, 2)};
    j["learn_kin"] = link.learn_kin;
    j["learn_inertial"] = link.learn_inertial;
    doc["links"].push_back(std::move(j));
  }
  return nlohmann::json(doc);
}

KinematicTree tree_from_config(const nlohmann::json& doc) { return KinematicTree::from_json(doc); }

std::array<std::string, kParamsPerLink> link_param_names(std::string_view link) {
  const std::string p(link);
  return {p + ".rpy.x",       p + ".rpy.y",       p + ".rpy.z",          p + ".xyz.x",
          p + ".xyz.y",       p + ".xyz.z",       p + ".sqrt_L1",        p + ".sqrt_L2",
          p + ".sqrt_L3",     p + ".sqrt_mass",   p + ".inertia_rpy.x",  p + ".inertia_rpy.y",
          p + ".inertia_rpy.z", p + ".com.x",     p + ".com.y",          p + ".com.z"};
}

std::vector<double> prior_tree_values(const KinematicTree& tree, std::vector<std::string>* warnings) {
  std::vector<double> out;
  out.reserve(tree.dof() * kParamsPerLink);
  for (const Link& link : tree.links()) {
    for (int k = 0; k < 3; ++k) out.push_back(link.kin.rpy(k));
    for (int k = 0; k < 3; ++k) out.push_back(link.kin.xyz(k));
    std::vector<std::string> local;
    const InertialParams<double> in = inertial_params_from_physical(link.inertial, &local);
    if (warnings != nullptr) {
      for (auto& w : local) warnings->push_back("link '" + link.name + "': " + w);
    }
    for (int k = 0; k < 3; ++k) out.push_back(in.sqrt_moments(k));
    out.push_back(in.sqrt_mass);
    for (int k = 0; k < 3; ++k) out.push_back(in.principal_rpy(k));
    for (int k = 0; k < 3; ++k) out.push_back(in.com(k));
  }
  return out;
}

TreeParamLayout add_tree_params(const KinematicTree& tree, ParamSet& params,
                                std::vector<std::string>* warnings) {
  TreeParamLayout layout{params.size(), tree.dof()};
  const std::vector<double> values = prior_tree_values(tree, warnings);
  for (std::size_t i = 0; i < tree.dof(); ++i) {
    const auto names = link_param_names(tree.link(i).name);
    for (std::size_t k = 0; k < kParamsPerLink; ++k) {
      params.add(names[k], values[i * kParamsPerLink + k]);
    }
  }
  return layout;
}

RealizedTree<double> realize_prior_tree(const KinematicTree& tree) {
  RealizedTree<double> out;
  out.gravity = tree.gravity();
  out.links.resize(tree.dof());
  out.children.resize(tree.dof());
  out.names.resize(tree.dof());
  for (std::size_t i = 0; i < tree.dof(); ++i) {
    const Link& link = tree.link(i);
    out.links[i].joint = link.joint;
    out.links[i].parent = link.parent;
    out.links[i].fixed = fixed_transform<double>(link.kin);
    const Eigen::Matrix3d c = skew<double>(link.inertial.com);
    out.links[i].inertia = GeneralizedInertia<double>{
        link.inertial.mass, link.inertial.com * link.inertial.mass,
        link.inertial.inertia - link.inertial.mass * c * c};
    out.children[i] = tree.children(i);
    out.names[i] = link.name;
  }
  return out;
}

}  // namespace diffnea
