#include "diffnea/systems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace diffnea {

std::string_view to_string(SystemKind kind) { return kind == SystemKind::kCartpole ? "cartpole" : "furuta"; }

SystemKind system_kind_from_string(std::string_view name) {
  if (name == "cartpole") return SystemKind::kCartpole;
  if (name == "furuta") return SystemKind::kFuruta;
  throw std::invalid_argument("unknown system '" + std::string(name) + "'");
}

namespace {

double rod_perpendicular_inertia(double m, double length, double radius) {
  return m * (3.0 * radius * radius + length * length) / 12.0;
}

std::array<double, 2> solve2(double m11, double m12, double m22, double r1, double r2) {
  const double det = m11 * m22 - m12 * m12;
  if (!(std::abs(det) > 0.0) || !std::isfinite(det)) throw std::domain_error("singular plant mass matrix");
  return {(m22 * r1 - m12 * r2) / det, (m11 * r2 - m12 * r1) / det};
}

void check2(std::span<const double> q, std::span<const double> qd, std::span<const double> u) {
  if (q.size() != 2 || qd.size() != 2 || u.size() != 2) throw std::invalid_argument("plant state must be 2-dimensional");
}

}  // namespace

double CartpoleParams::pole_inertia() const { return rod_perpendicular_inertia(pole_mass, pole_length, pole_radius); }

double FurutaParams::arm_pivot_inertia() const {
  const double c = 0.5 * arm_length;
  return rod_perpendicular_inertia(arm_mass, arm_length, rod_radius) + arm_mass * c * c;
}

std::array<double, 3> FurutaParams::pendulum_inertia() const {
  const double perp = rod_perpendicular_inertia(pendulum_mass, pendulum_length, rod_radius);
  return {0.5 * pendulum_mass * rod_radius * rod_radius, perp, perp};
}

std::array<double, 2> cartpole_accel(const CartpoleParams& p, std::span<const double> q, std::span<const double> qd,
                                     std::span<const double> u) {
  check2(q, qd, u);
  const double m = p.pole_mass;
  const double l = p.pole_com();
  const double c = std::cos(q[1]);
  const double s = std::sin(q[1]);
  const double m11 = p.cart_mass + m;
  const double m12 = -m * l * c;
  const double m22 = p.pole_inertia() + m * l * l;
  const double r1 = u[0] - p.cart_viscous * qd[0] - m * l * s * qd[1] * qd[1];
  const double r2 = u[1] - p.pole_viscous * qd[1] - m * p.gravity * l * s;
  return solve2(m11, m12, m22, r1, r2);
}

std::array<double, 2> furuta_accel(const FurutaParams& p, std::span<const double> q, std::span<const double> qd,
                                   std::span<const double> u) {
  check2(q, qd, u);
  const double m = p.pendulum_mass;
  const double l = p.pendulum_com();
  const double la = p.arm_length;
  const auto j = p.pendulum_inertia();
  const double k = m * l * l + j[1] - j[0];
  const double c = std::cos(q[1]);
  const double s = std::sin(q[1]);
  const double m11 = p.arm_pivot_inertia() + m * la * la + j[0] + k * s * s;
  const double m12 = m * la * l * c;
  const double m22 = m * l * l + j[2];
  const double r1 = u[0] - p.arm_viscous * qd[0] - 2.0 * k * s * c * qd[0] * qd[1] + m * la * l * s * qd[1] * qd[1];
  const double r2 = u[1] - p.pendulum_viscous * qd[1] + k * s * c * qd[0] * qd[0] - m * p.gravity * l * s;
  return solve2(m11, m12, m22, r1, r2);
}

Energy<double> cartpole_energy(const CartpoleParams& p, std::span<const double> q, std::span<const double> qd) {
  const double m = p.pole_mass;
  const double l = p.pole_com();
  const double c = std::cos(q[1]);
  Energy<double> e;
  e.kinetic = 0.5 * (p.cart_mass + m) * qd[0] * qd[0] - m * l * c * qd[0] * qd[1] +
              0.5 * (p.pole_inertia() + m * l * l) * qd[1] * qd[1];
  e.potential = -m * p.gravity * l * c;
  return e;
}

Energy<double> furuta_energy(const FurutaParams& p, std::span<const double> q, std::span<const double> qd) {
  const double m = p.pendulum_mass;
  const double l = p.pendulum_com();
  const double la = p.arm_length;
  const auto j = p.pendulum_inertia();
  const double k = m * l * l + j[1] - j[0];
  const double c = std::cos(q[1]);
  const double s = std::sin(q[1]);
  const double m11 = p.arm_pivot_inertia() + m * la * la + j[0] + k * s * s;
  const double m12 = m * la * l * c;
  const double m22 = m * l * l + j[2];
  Energy<double> e;
  e.kinetic = 0.5 * m11 * qd[0] * qd[0] + m12 * qd[0] * qd[1] + 0.5 * m22 * qd[1] * qd[1];
  e.potential = -m * p.gravity * l * c;
  return e;
}

KinematicTree cartpole_tree(const CartpoleParams& p) {
  constexpr double kHalfPi = 0.5 * std::numbers::pi;
  Link cart;
  cart.name = "cart";
  cart.joint = JointType::kPrismatic;
  cart.kin.rpy = {0.0, kHalfPi, 0.0};  // joint z along world x
  cart.inertial.mass = p.cart_mass;
  // 10 cm cube; irrelevant to the dynamics since the cart never rotates.
  cart.inertial.inertia = Eigen::Matrix3d::Identity() * (p.cart_mass * 0.02 / 12.0);

  Link pole;
  pole.name = "pole";
  pole.parent = 0;
  pole.joint = JointType::kRevolute;
  pole.kin.rpy = {-kHalfPi, 0.0, 0.0};  // joint z along world y, link x pointing down
  pole.inertial.mass = p.pole_mass;
  pole.inertial.com = {p.pole_com(), 0.0, 0.0};
  const double perp = p.pole_inertia();
  pole.inertial.inertia = Eigen::Vector3d(0.5 * p.pole_mass * p.pole_radius * p.pole_radius, perp, perp).asDiagonal();

  return KinematicTree("cartpole", Eigen::Vector3d(0.0, 0.0, -p.gravity), {cart, pole});
}

KinematicTree furuta_tree(const FurutaParams& p) {
  Link arm;
  arm.name = "arm";
  arm.joint = JointType::kRevolute;
  arm.inertial.mass = p.arm_mass;
  arm.inertial.com = {0.5 * p.arm_length, 0.0, 0.0};
  const double perp = rod_perpendicular_inertia(p.arm_mass, p.arm_length, p.rod_radius);
  arm.inertial.inertia = Eigen::Vector3d(0.5 * p.arm_mass * p.rod_radius * p.rod_radius, perp, perp).asDiagonal();

  Link pend;
  pend.name = "pendulum";
  pend.parent = 0;
  pend.joint = JointType::kRevolute;
  pend.kin.rpy = {0.0, 0.5 * std::numbers::pi, 0.0};  // joint z along the arm, link x pointing down
  pend.kin.xyz = {p.arm_length, 0.0, 0.0};
  pend.inertial.mass = p.pendulum_mass;
  pend.inertial.com = {p.pendulum_com(), 0.0, 0.0};
  const auto j = p.pendulum_inertia();
  pend.inertial.inertia = Eigen::Vector3d(j[0], j[1], j[2]).asDiagonal();

  return KinematicTree("furuta", Eigen::Vector3d(0.0, 0.0, -p.gravity), {arm, pend});
}

Plant Plant::cartpole(const CartpoleParams& p) {
  Plant out;
  out.kind_ = SystemKind::kCartpole;
  out.cartpole_ = p;
  return out;
}

Plant Plant::furuta(const FurutaParams& p) {
  Plant out;
  out.kind_ = SystemKind::kFuruta;
  out.furuta_ = p;
  return out;
}

Plant Plant::make(SystemKind kind) { return kind == SystemKind::kCartpole ? cartpole() : furuta(); }

Plant Plant::frictionless() const {
  Plant out = *this;
  out.cartpole_.cart_viscous = 0.0;
  out.cartpole_.pole_viscous = 0.0;
  out.furuta_.arm_viscous = 0.0;
  out.furuta_.pendulum_viscous = 0.0;
  return out;
}

bool Plant::has_friction() const {
  if (kind_ == SystemKind::kCartpole) return cartpole_.cart_viscous != 0.0 || cartpole_.pole_viscous != 0.0;
  return furuta_.arm_viscous != 0.0 || furuta_.pendulum_viscous != 0.0;
}

std::array<double, 2> Plant::accel(std::span<const double> q, std::span<const double> qd,
                                   std::span<const double> u) const {
  return kind_ == SystemKind::kCartpole ? cartpole_accel(cartpole_, q, qd, u) : furuta_accel(furuta_, q, qd, u);
}

Energy<double> Plant::energy(std::span<const double> q, std::span<const double> qd) const {
  return kind_ == SystemKind::kCartpole ? cartpole_energy(cartpole_, q, qd) : furuta_energy(furuta_, q, qd);
}

KinematicTree Plant::tree() const {
  return kind_ == SystemKind::kCartpole ? cartpole_tree(cartpole_) : furuta_tree(furuta_);
}

double Plant::pendulum_energy(std::span<const double> q, std::span<const double> qd) const {
  double inertia = 0.0;
  double mgl = 0.0;
  if (kind_ == SystemKind::kCartpole) {
    const double l = cartpole_.pole_com();
    inertia = cartpole_.pole_inertia() + cartpole_.pole_mass * l * l;
    mgl = cartpole_.pole_mass * cartpole_.gravity * l;
  } else {
    const double l = furuta_.pendulum_com();
    inertia = furuta_.pendulum_inertia()[2] + furuta_.pendulum_mass * l * l;
    mgl = furuta_.pendulum_mass * furuta_.gravity * l;
  }
  return 0.5 * inertia * qd[1] * qd[1] - mgl * std::cos(q[1]);
}

double Plant::upright_energy() const {
  if (kind_ == SystemKind::kCartpole) return cartpole_.pole_mass * cartpole_.gravity * cartpole_.pole_com();
  return furuta_.pendulum_mass * furuta_.gravity * furuta_.pendulum_com();
}

nlohmann::json Plant::to_json() const {
  nlohmann::ordered_json plant;
  if (kind_ == SystemKind::kCartpole) {
    const auto& p = cartpole_;
    plant["cart_mass"] = p.cart_mass;
    plant["pole_mass"] = p.pole_mass;
    plant["pole_length"] = p.pole_length;
    plant["pole_radius"] = p.pole_radius;
    plant["cart_viscous"] = p.cart_viscous;
    plant["pole_viscous"] = p.pole_viscous;
    plant["gravity"] = p.gravity;
  } else {
    const auto& p = furuta_;
    plant["arm_mass"] = p.arm_mass;
    plant["arm_length"] = p.arm_length;
    plant["pendulum_mass"] = p.pendulum_mass;
    plant["pendulum_length"] = p.pendulum_length;
    plant["rod_radius"] = p.rod_radius;
    plant["arm_viscous"] = p.arm_viscous;
    plant["pendulum_viscous"] = p.pendulum_viscous;
    plant["gravity"] = p.gravity;
  }
  nlohmann::ordered_json doc;
  doc["system"] = name();
  doc["plant"] = std::move(plant);
  return nlohmann::json(doc);
}

Plant Plant::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("system")) throw SchemaError("", "plant document needs a 'system' field");
  const SystemKind kind = system_kind_from_string(doc["system"].get<std::string>());
  const nlohmann::json c = doc.value("plant", nlohmann::json::object());
  auto get = [&](const char* key, double fallback) {
    if (!c.contains(key)) return fallback;
    if (!c[key].is_number()) throw SchemaError("", std::string("plant.") + key + " must be numeric");
    return c[key].get<double>();
  };
  if (kind == SystemKind::kCartpole) {
    CartpoleParams p;
    p.cart_mass = get("cart_mass", p.cart_mass);
    p.pole_mass = get("pole_mass", p.pole_mass);
    p.pole_length = get("pole_length", p.pole_length);
    p.pole_radius = get("pole_radius", p.pole_radius);
    p.cart_viscous = get("cart_viscous", p.cart_viscous);
    p.pole_viscous = get("pole_viscous", p.pole_viscous);
    p.gravity = get("gravity", p.gravity);
    if (!(p.cart_mass > 0 && p.pole_mass > 0 && p.pole_length > 0) || p.pole_radius < 0) {
      throw SchemaError("", "cartpole masses and lengths must be positive");
    }
    return cartpole(p);
  }
  FurutaParams p;
  p.arm_mass = get("arm_mass", p.arm_mass);
  p.arm_length = get("arm_length", p.arm_length);
  p.pendulum_mass = get("pendulum_mass", p.pendulum_mass);
  p.pendulum_length = get("pendulum_length", p.pendulum_length);
  p.rod_radius = get("rod_radius", p.rod_radius);
  p.arm_viscous = get("arm_viscous", p.arm_viscous);
  p.pendulum_viscous = get("pendulum_viscous", p.pendulum_viscous);
  p.gravity = get("gravity", p.gravity);
  if (!(p.arm_mass > 0 && p.arm_length > 0 && p.pendulum_mass > 0 && p.pendulum_length > 0) || p.rod_radius < 0) {
    throw SchemaError("", "furuta masses and lengths must be positive");
  }
  return furuta(p);
}

std::uint64_t Plant::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char ch : to_json().dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

SwingUpConfig SwingUpConfig::defaults(SystemKind kind) {
  SwingUpConfig cfg;
  if (kind == SystemKind::kFuruta) {
    cfg.gain = 200.0;
    cfg.max_input = 0.05;
  }
  return cfg;
}

nlohmann::json to_json(const SwingUpConfig& cfg) {
  return {{"gain", cfg.gain},
          {"max_input", cfg.max_input},
          {"upright_window", cfg.upright_window},
          {"hold_time", cfg.hold_time},
          {"centering_gain", cfg.centering_gain},
          {"centering_damping", cfg.centering_damping}};
}

SwingUpConfig swingup_config_from_json(const nlohmann::json& doc, SystemKind kind) {
  SwingUpConfig cfg = SwingUpConfig::defaults(kind);
  cfg.gain = doc.value("gain", cfg.gain);
  cfg.max_input = doc.value("max_input", cfg.max_input);
  cfg.upright_window = doc.value("upright_window", cfg.upright_window);
  cfg.hold_time = doc.value("hold_time", cfg.hold_time);
  cfg.centering_gain = doc.value("centering_gain", cfg.centering_gain);
  cfg.centering_damping = doc.value("centering_damping", cfg.centering_damping);
  return cfg;
}

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, kTwoPi);
  if (a <= 0.0) a += kTwoPi;
  return a - std::numbers::pi;
}

double swingup_law(const Plant& plant, const SwingUpConfig& cfg, std::span<const double> q,
                   std::span<const double> qd) {
  const double error = plant.upright_energy() - plant.pendulum_energy(q, qd);
  const double x = qd[1] * std::cos(q[1]);
  const double dir = x < 0.0 ? -1.0 : 1.0;
  // Cartpole: dE/dt = m l cos(th) th' s''. Furuta: dE/dt = -m L_a l cos(th) th' a''.
  const double coupling = plant.kind() == SystemKind::kCartpole ? 1.0 : -1.0;
  double u = cfg.gain * error * dir * coupling;
  if (plant.kind() == SystemKind::kCartpole) u -= cfg.centering_gain * q[0] + cfg.centering_damping * qd[0];
  return std::clamp(u, -cfg.max_input, cfg.max_input);
}

std::vector<double> SwingUpController::operator()(double t, std::span<const double> q, std::span<const double> qd) {
  std::vector<double> u(plant_.dof(), 0.0);
  if (holding(t)) return u;
  if (std::abs(wrap_angle(q[1] - std::numbers::pi)) < cfg_.upright_window) {
    hold_until_ = t + cfg_.hold_time;
    return u;
  }
  u[0] = swingup_law(plant_, cfg_, q, qd);
  return u;
}

}  // namespace diffnea
