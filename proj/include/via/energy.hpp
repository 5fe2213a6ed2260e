#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "via/dynamics.hpp"

namespace via {

// Energy totals over one trajectory. net = work - regenerated always; the
// ratio is regenerated/work when positive work was delivered, else 0.
struct EnergyReport {
  double work = 0.0;         // E, J: mechanical work delivered to the link
  double regenerated = 0.0;  // E_rege, J
  double net = 0.0;          // E_net = E - E_rege, J
  double ratio = 0.0;        // eta = E_rege / E
  double consumed = 0.0;     // E_in, J (0 for models without servo channels)
};

namespace detail {
template <class Model, class PerSample>
double trapezoid(const Trajectory<Model>& traj, PerSample&& value) {
  if (traj.samples() < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 1; i < traj.samples(); ++i)
    sum += 0.5 * (value(i - 1) + value(i)) * traj.step;
  return sum;
}
}  // namespace detail

// E = integral of the power delivered onto the link (spring-port power).
template <class Model>
double mechanical_work(const Trajectory<Model>& traj) {
  return detail::trapezoid(traj, [&](std::size_t i) { return traj.powers[i].output; });
}

// E_rege = integral of the regeneration power.
template <class Model>
double regenerated_energy(const Trajectory<Model>& traj) {
  return detail::trapezoid(traj, [&](std::size_t i) { return traj.powers[i].regen; });
}

enum class ConsumptionMode { Rectified, Raw };

// E_in = integral of the motor-side input power. The hardware servos cannot
// regenerate, so the default rectifies each channel; Raw integrates the
// signed sum and exists for the power-balance identity.
inline double consumed_energy(const Trajectory<MaccepaModel>& traj,
                              ConsumptionMode mode = ConsumptionMode::Rectified) {
  if (mode == ConsumptionMode::Raw)
    return detail::trapezoid(traj, [&](std::size_t i) { return traj.powers[i].motor1 + traj.powers[i].motor2; });
  return detail::trapezoid(traj, [&](std::size_t i) {
    return std::max(0.0, traj.powers[i].motor1) + std::max(0.0, traj.powers[i].motor2);
  });
}

inline double consumed_energy(const Trajectory<PendulumModel>&, ConsumptionMode = ConsumptionMode::Rectified) {
  throw std::invalid_argument("consumed_energy: model has no servo channels to meter");
}

// Integral of the squared spring force, N^2 s. The electrical draw of the
// pretension servo working against the spring rises monotonically with the
// squared force, so this is the consumption surrogate used for condition
// comparisons, where only orderings and min-max scores matter.
inline double consumption_surrogate(const Trajectory<MaccepaModel>& traj) {
  return detail::trapezoid(
      traj, [&](std::size_t i) { return traj.powers[i].spring_force * traj.powers[i].spring_force; });
}

template <class Model>
EnergyReport energy_report(const Trajectory<Model>& traj) {
  EnergyReport r;
  r.work = mechanical_work(traj);
  r.regenerated = regenerated_energy(traj);
  r.net = r.work - r.regenerated;
  r.ratio = r.work > 0.0 ? r.regenerated / r.work : 0.0;
  if constexpr (std::is_same_v<Model, MaccepaModel>) r.consumed = consumed_energy(traj);
  return r;
}

// Pointwise residual of the power-flow identity
//   dE_s/dt = -P_out + P_in1 + P_in2,
// normalized by max(1, |P_out|). The rate of spring-energy change is formed
// from central differences of E_s in each coordinate chained with the
// recorded velocities, so the recorded torque-based powers are checked
// against the energy function itself. Returns the maximum over all samples.
inline double max_power_balance_residual(const Trajectory<MaccepaModel>& traj, const MaccepaParams& p,
                                         double h = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < traj.samples(); ++i) {
    const auto& x = traj.states[i];
    const double de_dq = (spring_energy(p, x[0] + h, x[2], x[3]) - spring_energy(p, x[0] - h, x[2], x[3])) / (2.0 * h);
    const double de_dt1 = (spring_energy(p, x[0], x[2] + h, x[3]) - spring_energy(p, x[0], x[2] - h, x[3])) / (2.0 * h);
    const double de_dt2 = (spring_energy(p, x[0], x[2], x[3] + h) - spring_energy(p, x[0], x[2], x[3] - h)) / (2.0 * h);
    const double es_rate = de_dq * x[1] + de_dt1 * x[4] + de_dt2 * x[5];
    const auto& pw = traj.powers[i];
    const double residual = std::abs(es_rate + pw.output - pw.motor1 - pw.motor2);
    worst = std::max(worst, residual / std::max(1.0, std::abs(pw.output)));
  }
  return worst;
}

}  // namespace via
