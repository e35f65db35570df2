#pragma once

// Closed-form equations of motion for the two benchmark plants, derived with
// Lagrange's equations independently of the spatial-algebra code, plus the
// matching kinematic trees and an energy-based swing-up controller.
//
// Cartpole: q = (s, th). s is the cart position along world x, th the pole
// angle about world y with th = 0 hanging down. The pole is a thin cylinder
// with its CoM at l = L/2 from the pivot.
//
//   (M + m) s'' - m l cos(th) th'' + m l sin(th) th'^2 = u_s  - b_s s'
//   -m l cos(th) s'' + (I + m l^2) th'' + m g l sin(th) = u_th - b_th th'
//
// Furuta: q = (a, th). a is the arm angle about world z, th the pendulum
// angle about the arm's radial axis, th = 0 hanging down. With c = cos(th),
// s = sin(th), K = m l^2 + J_yy - J_xx (pendulum inertias about its CoM):
//
//   M11 = J_a + m L_a^2 + J_xx + K s^2,  M12 = m L_a l c,  M22 = m l^2 + J_zz
//   M11 a'' + M12 th'' + 2 K s c a' th' - m L_a l s th'^2 = u_a  - b_a a'
//   M12 a'' + M22 th'' - K s c a'^2 + m g l s            = u_th - b_th th'

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffnea/dynamics.hpp"
#include "diffnea/model.hpp"

namespace diffnea {

enum class SystemKind { kCartpole, kFuruta };

std::string_view to_string(SystemKind kind);
SystemKind system_kind_from_string(std::string_view name);

struct CartpoleParams {
  double cart_mass = 0.5;        // kg
  double pole_mass = 0.12;       // kg
  double pole_length = 0.6;      // m, full length
  double pole_radius = 0.005;    // m
  double cart_viscous = 5.0;     // N s / m
  double pole_viscous = 2e-4;    // N m s
  double gravity = 9.81;         // m / s^2

  double pole_com() const { return 0.5 * pole_length; }
  /// Pole moment of inertia about its CoM, perpendicular to the rod.
  double pole_inertia() const;
};

struct FurutaParams {
  double arm_mass = 0.095;          // kg
  double arm_length = 0.085;        // m
  double pendulum_mass = 0.024;     // kg
  double pendulum_length = 0.129;   // m
  double rod_radius = 0.0045;       // m
  double arm_viscous = 5e-5;        // N m s
  double pendulum_viscous = 5e-5;   // N m s
  double gravity = 9.81;

  double pendulum_com() const { return 0.5 * pendulum_length; }
  /// Arm inertia about the vertical axis through the pivot.
  double arm_pivot_inertia() const;
  /// Pendulum inertias about its CoM along (rod, perpendicular, perpendicular).
  std::array<double, 3> pendulum_inertia() const;
};

std::array<double, 2> cartpole_accel(const CartpoleParams& p, std::span<const double> q, std::span<const double> qd,
                                     std::span<const double> u);
std::array<double, 2> furuta_accel(const FurutaParams& p, std::span<const double> q, std::span<const double> qd,
                                   std::span<const double> u);
Energy<double> cartpole_energy(const CartpoleParams& p, std::span<const double> q, std::span<const double> qd);
Energy<double> furuta_energy(const FurutaParams& p, std::span<const double> q, std::span<const double> qd);

KinematicTree cartpole_tree(const CartpoleParams& p);
KinematicTree furuta_tree(const FurutaParams& p);

/// One benchmark plant with its constants.
class Plant {
 public:
  static Plant cartpole(const CartpoleParams& p = {});
  static Plant furuta(const FurutaParams& p = {});
  static Plant make(SystemKind kind);

  SystemKind kind() const noexcept { return kind_; }
  std::string name() const { return std::string(to_string(kind_)); }
  std::size_t dof() const noexcept { return 2; }
  const CartpoleParams& cartpole_params() const noexcept { return cartpole_; }
  const FurutaParams& furuta_params() const noexcept { return furuta_; }

  /// Same plant with both viscous coefficients set to zero.
  Plant frictionless() const;
  bool has_friction() const;

  std::array<double, 2> accel(std::span<const double> q, std::span<const double> qd, std::span<const double> u) const;
  Energy<double> energy(std::span<const double> q, std::span<const double> qd) const;
  KinematicTree tree() const;

  /// Only the first joint carries a motor.
  std::array<bool, 2> actuated() const noexcept { return {true, false}; }
  std::size_t pendulum_joint() const noexcept { return 1; }
  /// Energy of the pendulum alone (zero hanging at rest is -m g l).
  double pendulum_energy(std::span<const double> q, std::span<const double> qd) const;
  /// Pendulum energy at rest, upright.
  double upright_energy() const;

  nlohmann::json to_json() const;
  /// {"system": "cartpole"|"furuta", "plant": {...}}; missing constants keep
  /// their defaults. A tree config carrying those keys is accepted as is.
  static Plant from_json(const nlohmann::json& doc);
  /// FNV-1a over the canonical JSON text.
  std::uint64_t hash() const;

 private:
  SystemKind kind_ = SystemKind::kCartpole;
  CartpoleParams cartpole_;
  FurutaParams furuta_;
};

struct SwingUpConfig {
  double gain = 500.0;           // k_e
  double max_input = 5.0;        // u_max
  double upright_window = 0.1;   // rad
  double hold_time = 1.0;        // s spent unactuated after reaching upright
  double centering_gain = 0.0;   // cartpole: -k_x s
  double centering_damping = 0.0;  // cartpole: -k_v s'

  static SwingUpConfig defaults(SystemKind kind);
};

nlohmann::json to_json(const SwingUpConfig& cfg);
SwingUpConfig swingup_config_from_json(const nlohmann::json& doc, SystemKind kind);

/// Stateless energy-pumping law u = k (E_des - E) d, saturated at u_max,
/// where d = +-sign(th' cos th) is oriented so the pendulum gains energy.
/// sign(0) counts as +1 so the law can start from rest.
double swingup_law(const Plant& plant, const SwingUpConfig& cfg, std::span<const double> q,
                   std::span<const double> qd);

/// swingup_law with the upright hold: once the pendulum is within the
/// window of upright the input is switched off for hold_time, letting it fall
/// before the next swing-up.
class SwingUpController {
 public:
  SwingUpController(Plant plant, SwingUpConfig cfg) : plant_(std::move(plant)), cfg_(cfg) {}

  /// Generalized force on every joint (zero on unactuated joints).
  std::vector<double> operator()(double t, std::span<const double> q, std::span<const double> qd);
  void reset() { hold_until_ = -1.0; }
  bool holding(double t) const { return t < hold_until_; }

 private:
  Plant plant_;
  SwingUpConfig cfg_;
  double hold_until_ = -1.0;
};

/// Angle difference wrapped to (-pi, pi].
double wrap_angle(double a);

}  // namespace diffnea
