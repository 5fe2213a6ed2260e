#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "via/damping.hpp"
#include "via/prng.hpp"

namespace via {

// One measurement of the virtual characterization rig: a driving motor spins
// the damping motor at steady state while three ammeters read the driving,
// damping and storage-branch currents.
struct CharacterizationRow {
  double control = 0.0;            // u
  double duty_regen = 0.0;         // D_r
  double duty_brake = 0.0;         // D_d
  double damping_estimate = 0.0;   // d_hat, Nms/rad
  double regen_estimate = 0.0;     // p0_hat, W s^2/rad^2
  double speed = 0.0;              // omega, rad/s
  double drive_current = 0.0;      // I1, A
  double damper_current = 0.0;     // I2, A
  double load_current = 0.0;       // Ir, A
};

struct RigOptions {
  double supply_voltage = 10.0;  // V_bb
  int repeats = 1;
  double noise_rel_std = 0.0;  // multiplicative gaussian noise on the currents
  std::uint64_t seed = 0;
  double split_point = 0.5;
};

// Steady-state sweep of the hybrid braking module on the back-to-back motor
// rig. The model is loss-free apart from the winding resistances; inductance
// and switching-frequency effects are not modelled. With zero noise the
// estimators invert the model exactly.
inline std::vector<CharacterizationRow> characterize_rig(const MotorParams& motor, const StorageParams& storage,
                                                         std::span<const double> u_grid,
                                                         const RigOptions& opt = {}) {
  motor.validate();
  storage.validate(motor);
  if (!(opt.supply_voltage > 0.0)) throw std::invalid_argument("characterize_rig: supply voltage must be > 0");
  if (opt.repeats < 1) throw std::invalid_argument("characterize_rig: repeats must be >= 1");

  const DampingConfig cfg =
      DampingConfig::from_motor(DampingScheme::Hybrid, motor, storage, opt.split_point);
  const double nk = motor.gear_ratio * motor.torque_constant;
  Prng rng(opt.seed);

  std::vector<CharacterizationRow> rows;
  rows.reserve(u_grid.size() * static_cast<std::size_t>(opt.repeats));
  for (int rep = 0; rep < opt.repeats; ++rep) {
    for (double u : u_grid) {
      const double d = damping_coefficient(cfg, u);
      const double p0 = regen_coefficient(cfg, u);
      const DutyCycles duty = duty_cycles(u, opt.split_point);

      // Supply loop: V_bb = I1 R_m + nk * omega, with the drive torque
      // nk * I1 balancing the damping torque d * omega at steady state.
      const double omega = opt.supply_voltage * nk / (nk * nk + d * motor.winding_resistance);
      double i1 = d * omega / nk;
      double i2 = i1;  // equal torques on the coupled shafts
      double ir = omega * std::sqrt(p0 / storage.load_resistance);

      if (opt.noise_rel_std > 0.0) {
        i1 *= 1.0 + opt.noise_rel_std * rng.gaussian();
        i2 *= 1.0 + opt.noise_rel_std * rng.gaussian();
        ir *= 1.0 + opt.noise_rel_std * rng.gaussian();
      }

      const double emf = opt.supply_voltage - i1 * motor.winding_resistance;  // nk * omega
      CharacterizationRow row;
      row.control = u;
      row.duty_regen = duty.regen;
      row.duty_brake = duty.brake;
      row.speed = omega;
      row.drive_current = i1;
      row.damper_current = i2;
      row.load_current = ir;
      row.damping_estimate = nk * nk * i2 / emf;
      row.regen_estimate = nk * nk * ir * ir * storage.load_resistance / (emf * emf);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace via
