#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace via {

inline constexpr double kPi = 3.14159265358979323846;

// Electrical constants of the damping motor. The torque constant doubles as
// the back-EMF constant (numerically equal in SI units).
struct MotorParams {
  double gear_ratio = 1.0;          // n_d, dimensionless
  double torque_constant = 0.0;     // k_t = k_b, Nm/A (V s/rad)
  double winding_resistance = 0.0;  // R_m, ohm

  // n_d^2 k_t^2 / R_m: damping ceiling when the motor is shorted.
  double max_dynamic_damping() const {
    const double nk = gear_ratio * torque_constant;
    return nk * nk / winding_resistance;
  }

  void validate() const {
    if (!(gear_ratio > 0.0)) throw std::invalid_argument("MotorParams: gear_ratio must be > 0");
    if (!(torque_constant > 0.0)) throw std::invalid_argument("MotorParams: torque_constant must be > 0");
    if (!(winding_resistance > 0.0)) throw std::invalid_argument("MotorParams: winding_resistance must be > 0");
  }
};

// Storage element (battery / supercapacitor) modelled as an internal
// resistance in series with the damping motor winding.
struct StorageParams {
  double load_resistance = 0.0;  // R_l, ohm
  double alpha = 0.0;            // R_l / (R_m + R_l)

  static StorageParams from(const MotorParams& motor, double load_resistance) {
    StorageParams s;
    s.load_resistance = load_resistance;
    s.alpha = load_resistance / (motor.winding_resistance + load_resistance);
    s.validate(motor);
    return s;
  }

  void validate(const MotorParams& motor) const {
    if (!(load_resistance > 0.0)) throw std::invalid_argument("StorageParams: load_resistance must be > 0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("StorageParams: alpha must be in (0,1)");
    const double expected = load_resistance / (motor.winding_resistance + load_resistance);
    if (std::abs(alpha - expected) > 1e-12)
      throw std::invalid_argument("StorageParams: alpha inconsistent with resistances");
  }
};

enum class DampingScheme { Dynamic, Regenerative, Hybrid, Fixed };

// PWM duty cycles of the two braking switches.
struct DutyCycles {
  double regen = 0.0;  // D_r, drives the regenerative path
  double brake = 0.0;  // D_d, drives the short-circuit (dynamic) path
};

namespace detail {
inline void check_control(double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("damping control must lie in [0,1]");
}
inline void check_split(double u_r) {
  if (!(u_r > 0.0 && u_r < 1.0)) throw std::invalid_argument("split point must lie in (0,1)");
}
}  // namespace detail

// Couples both switch duty cycles to a single control input. Below the split
// point the regenerative switch ramps alone; above it the dynamic-braking
// switch blends in while the regenerative one stays fully on.
inline DutyCycles duty_cycles(double u, double split_point) {
  detail::check_control(u);
  detail::check_split(split_point);
  if (u <= split_point) return {u / split_point, 0.0};
  return {1.0, (u - split_point) / (1.0 - split_point)};
}

// One braking module configuration. The three maxima are linked: the hybrid
// range equals the dynamic one, and the regenerative ceiling is what remains
// once the storage resistance is in the loop, max_regenerative =
// (1 - alpha) * max_dynamic.
struct DampingConfig {
  DampingScheme scheme = DampingScheme::Hybrid;
  double split_point = 0.5;       // u_r
  double max_dynamic = 0.0;       // Nms/rad, shorted-winding ceiling
  double max_regenerative = 0.0;  // Nms/rad, storage-loop ceiling
  double max_hybrid = 0.0;        // Nms/rad, equals max_dynamic
  double alpha = 0.0;             // storage share of total resistance
  double fixed_value = 0.0;       // Nms/rad, used only by the Fixed scheme

  static DampingConfig from_limits(DampingScheme scheme, double max_dynamic, double alpha,
                                   double split_point = 0.5, double fixed_value = 0.0) {
    DampingConfig cfg;
    cfg.scheme = scheme;
    cfg.split_point = split_point;
    cfg.max_dynamic = max_dynamic;
    cfg.max_regenerative = (1.0 - alpha) * max_dynamic;
    cfg.max_hybrid = max_dynamic;
    cfg.alpha = alpha;
    cfg.fixed_value = fixed_value;
    cfg.validate();
    return cfg;
  }

  static DampingConfig from_motor(DampingScheme scheme, const MotorParams& motor, const StorageParams& storage,
                                  double split_point = 0.5, double fixed_value = 0.0) {
    motor.validate();
    storage.validate(motor);
    return from_limits(scheme, motor.max_dynamic_damping(), storage.alpha, split_point, fixed_value);
  }

  void validate() const {
    detail::check_split(split_point);
    if (!(max_dynamic > 0.0)) throw std::invalid_argument("DampingConfig: max_dynamic must be > 0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("DampingConfig: alpha must be in (0,1)");
    if (std::abs(max_hybrid - max_dynamic) > 1e-12 * max_dynamic)
      throw std::invalid_argument("DampingConfig: hybrid range must equal the dynamic range");
    const double expected = (1.0 - alpha) * max_dynamic;
    if (std::abs(max_regenerative - expected) > 1e-12 * max_dynamic)
      throw std::invalid_argument("DampingConfig: max_regenerative inconsistent with alpha");
    if (scheme == DampingScheme::Fixed && !(fixed_value >= 0.0))
      throw std::invalid_argument("DampingConfig: fixed_value must be >= 0");
  }
};

namespace detail {

// Saturating evaluations for use inside dynamics/cost code, where finite
// difference probes may step a hair outside [0,1]. Physical duty cycles
// saturate, so clamping is the faithful behaviour.
inline double damping_coefficient_sat(const DampingConfig& cfg, double u) {
  u = std::clamp(u, 0.0, 1.0);
  switch (cfg.scheme) {
    case DampingScheme::Dynamic: return cfg.max_dynamic * u;
    case DampingScheme::Regenerative: return cfg.max_regenerative * u;
    case DampingScheme::Hybrid: return cfg.max_hybrid * u;
    case DampingScheme::Fixed: return cfg.fixed_value;
  }
  return 0.0;
}

// Normalized regeneration coefficient P0 such that P_rege = P0 * qdot^2.
inline double regen_coefficient_sat(const DampingConfig& cfg, double u) {
  u = std::clamp(u, 0.0, 1.0);
  switch (cfg.scheme) {
    case DampingScheme::Dynamic:
      return 0.0;
    case DampingScheme::Regenerative:
      return cfg.alpha * cfg.max_regenerative * u;  // u is D_r directly
    case DampingScheme::Hybrid: {
      double d_r, d_d;
      if (u <= cfg.split_point) {
        d_r = u / cfg.split_point;
        d_d = 0.0;
      } else {
        d_r = 1.0;
        d_d = (u - cfg.split_point) / (1.0 - cfg.split_point);
      }
      return cfg.alpha * cfg.max_regenerative * (d_r - d_d);
    }
    case DampingScheme::Fixed: {
      // The Fixed scheme is the hybrid hardware parked at a constant level;
      // it regenerates at whatever the coupling yields for that level.
      if (!(cfg.max_hybrid > 0.0)) return 0.0;
      const double u_eff = std::clamp(cfg.fixed_value / cfg.max_hybrid, 0.0, 1.0);
      DampingConfig hybrid = cfg;
      hybrid.scheme = DampingScheme::Hybrid;
      return regen_coefficient_sat(hybrid, u_eff);
    }
  }
  return 0.0;
}

// Slope of the regeneration coefficient with respect to the control. At the
// split-point kink the mean of the one-sided slopes is used (what a central
// difference straddling the kink computes).
inline double regen_coefficient_slope(const DampingConfig& cfg, double u) {
  switch (cfg.scheme) {
    case DampingScheme::Dynamic:
    case DampingScheme::Fixed:
      return 0.0;
    case DampingScheme::Regenerative:
      return cfg.alpha * cfg.max_regenerative;
    case DampingScheme::Hybrid: {
      const double up = cfg.alpha * cfg.max_regenerative / cfg.split_point;
      const double down = -cfg.alpha * cfg.max_regenerative / (1.0 - cfg.split_point);
      if (u < cfg.split_point) return up;
      if (u > cfg.split_point) return down;
      return 0.5 * (up + down);
    }
  }
  return 0.0;
}

}  // namespace detail

// Damping coefficient d(u) in Nms/rad for the configured scheme.
inline double damping_coefficient(const DampingConfig& cfg, double u) {
  detail::check_control(u);
  return detail::damping_coefficient_sat(cfg, u);
}

// Normalized regeneration coefficient P0(u) in W s^2/rad^2.
inline double regen_coefficient(const DampingConfig& cfg, double u) {
  detail::check_control(u);
  return detail::regen_coefficient_sat(cfg, u);
}

// Instantaneous regeneration power in W; even in the joint velocity.
inline double regen_power(const DampingConfig& cfg, double u, double qdot) {
  return regen_coefficient(cfg, u) * qdot * qdot;
}

// State of the four-switch bridge for a given control input and current
// direction. The roles of S1/S2 swap with the current direction so that the
// generated current always enters the storage element at its positive
// terminal; zero current direction is treated as positive (no torque flows
// at zero velocity, so the choice is inconsequential).
struct SwitchConfig {
  double duty_s1 = 0.0;
  double duty_s2 = 0.0;
  bool s3_closed = false;
  bool s4_closed = false;
};

inline SwitchConfig switch_states(double u, int current_direction, double split_point = 0.5) {
  if (current_direction < -1 || current_direction > 1)
    throw std::invalid_argument("switch_states: current_direction must be -1, 0 or +1");
  const DutyCycles d = duty_cycles(u, split_point);
  if (current_direction >= 0) return {d.regen, d.brake, false, true};
  return {d.brake, d.regen, true, false};
}

}  // namespace via
