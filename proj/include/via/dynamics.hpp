#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "via/damping.hpp"

namespace via {

// Command triple: equilibrium-position motor, stiffness motor, damping
// module. All are commands, not physical quantities.
struct ControlInput {
  double equilibrium = 0.0;  // u1, rad
  double stiffness = 0.0;    // u2, dimensionless (pendulum) or pretension angle (MACCEPA)
  double damping = 0.0;      // u3 in [0,1]

  double& operator[](int i) { return i == 0 ? equilibrium : (i == 1 ? stiffness : damping); }
  double operator[](int i) const { return i == 0 ? equilibrium : (i == 1 ? stiffness : damping); }
};

struct ControlBounds {
  std::array<double, 3> lower{};
  std::array<double, 3> upper{};

  ControlInput clamp(ControlInput u) const {
    for (int i = 0; i < 3; ++i) u[i] = std::clamp(u[i], lower[i], upper[i]);
    return u;
  }
  bool contains(const ControlInput& u, double slack = 0.0) const {
    for (int i = 0; i < 3; ++i)
      if (u[i] < lower[i] - slack || u[i] > upper[i] + slack) return false;
    return true;
  }
};

// Instantaneous per-sample bookkeeping along a trajectory.
struct PowerSample {
  double regen = 0.0;          // P_rege, W
  double motor1 = 0.0;         // P_in1 = -tau1 * theta1dot, W (MACCEPA only)
  double motor2 = 0.0;         // P_in2 = -tau2 * theta2dot, W (MACCEPA only)
  double output = 0.0;         // P_out delivered to the link, W
  double damping_coeff = 0.0;  // d(u3), Nms/rad
  double spring_force = 0.0;   // F_s, N (MACCEPA only)
};

// ---------------------------------------------------------------------------
// Ideal VIA pendulum: point mass on a massless rod, torque k(u2)(u1 - q)
// from an ideal variable spring, parallel damping module on the joint.

struct IdealPendulumParams {
  double mass = 1.0;            // kg
  double length = 1.0;          // m
  double friction = 0.01;       // b, Nms/rad
  double max_stiffness = 200.0; // Nm/rad at u2 = 1
  std::array<double, 2> equilibrium_bounds = {-kPi / 2.0, kPi / 2.0};
  DampingConfig damping;

  void validate() const {
    if (!(mass > 0.0)) throw std::invalid_argument("IdealPendulumParams: mass must be > 0");
    if (!(length > 0.0)) throw std::invalid_argument("IdealPendulumParams: length must be > 0");
    if (!(friction >= 0.0)) throw std::invalid_argument("IdealPendulumParams: friction must be >= 0");
    if (!(max_stiffness > 0.0)) throw std::invalid_argument("IdealPendulumParams: max_stiffness must be > 0");
    damping.validate();
  }
};

struct PendulumModel {
  static constexpr int state_dim = 2;
  using State = Eigen::Matrix<double, 2, 1>;  // q, qdot

  IdealPendulumParams params;

  double inertia() const { return params.mass * params.length * params.length; }

  State derivative(const State& x, const ControlInput& u) const {
    const double d = detail::damping_coefficient_sat(params.damping, u.damping);
    const double k = params.max_stiffness * u.stiffness;
    const double qdd = (k * (u.equilibrium - x[0]) - (d + params.friction) * x[1]) / inertia();
    return {x[1], qdd};
  }

  PowerSample powers(const State& x, const ControlInput& u) const {
    PowerSample p;
    p.damping_coeff = detail::damping_coefficient_sat(params.damping, u.damping);
    p.regen = detail::regen_coefficient_sat(params.damping, u.damping) * x[1] * x[1];
    p.output = params.max_stiffness * u.stiffness * (u.equilibrium - x[0]) * x[1];
    return p;
  }

  ControlBounds default_bounds() const {
    return {{params.equilibrium_bounds[0], 0.0, 0.0}, {params.equilibrium_bounds[1], 1.0, 1.0}};
  }
};

// ---------------------------------------------------------------------------
// MACCEPA with variable damping: lever-and-spring linkage on the joint, two
// critically damped servo channels for equilibrium and pretension, damping
// module on the joint.

struct MaccepaParams {
  double lever_arm = 0.036;        // B, m
  double anchor_distance = 0.135;  // C, m
  double drum_radius = 0.015;      // r, m
  double spring_constant = 394.0;  // kappa, N/m
  double link_inertia = 0.0036;    // kg m^2
  double joint_friction = 0.0077;  // b, Nms/rad
  double servo_bandwidth = 25.0;   // beta, 1/s
  double external_torque = 0.0;    // Nm
  std::array<double, 2> equilibrium_bounds = {-kPi / 3.0, kPi / 3.0};
  std::array<double, 2> pretension_bounds = {0.0, kPi / 3.0};
  DampingConfig damping;

  void validate() const {
    if (!(lever_arm > 0.0 && anchor_distance > 0.0)) throw std::invalid_argument("MaccepaParams: lengths must be > 0");
    if (!(lever_arm < anchor_distance))
      throw std::invalid_argument("MaccepaParams: lever_arm must be shorter than anchor_distance");
    if (!(drum_radius > 0.0)) throw std::invalid_argument("MaccepaParams: drum_radius must be > 0");
    if (!(spring_constant > 0.0)) throw std::invalid_argument("MaccepaParams: spring_constant must be > 0");
    if (!(link_inertia > 0.0)) throw std::invalid_argument("MaccepaParams: link_inertia must be > 0");
    if (!(joint_friction >= 0.0)) throw std::invalid_argument("MaccepaParams: joint_friction must be >= 0");
    if (!(servo_bandwidth > 0.0)) throw std::invalid_argument("MaccepaParams: servo_bandwidth must be > 0");
    damping.validate();
  }
};

namespace detail {
// Spring linkage geometry at deflection phi = theta1 - q. With lever_arm <
// anchor_distance the chord length is bounded below by their difference, so
// the stretch denominators never vanish.
struct SpringGeometry {
  double chord = 0.0;     // A(q, theta1)
  double sin_phi = 0.0;
  double cos_phi = 0.0;
  double stretch = 0.0;   // A - |C - B| + r * theta2
};

inline SpringGeometry spring_geometry(const MaccepaParams& p, double q, double theta1, double theta2) {
  SpringGeometry g;
  const double phi = theta1 - q;
  g.sin_phi = std::sin(phi);
  g.cos_phi = std::cos(phi);
  const double b = p.lever_arm, c = p.anchor_distance;
  g.chord = std::sqrt(b * b + c * c - 2.0 * b * c * g.cos_phi);
  if (!(g.chord > 0.0)) throw std::domain_error("spring geometry degenerate: chord length is zero");
  g.stretch = g.chord - (c - b) + p.drum_radius * theta2;
  return g;
}
}  // namespace detail

// Joint torque exerted by the spring linkage.
inline double spring_torque(const MaccepaParams& p, double q, double theta1, double theta2) {
  const auto g = detail::spring_geometry(p, q, theta1, theta2);
  const double bc = p.lever_arm * p.anchor_distance;
  const double offset = p.drum_radius * theta2 - (p.anchor_distance - p.lever_arm);
  return p.spring_constant * bc * g.sin_phi * (1.0 + offset / g.chord);
}

// Scalar spring force kappa * elongation.
inline double spring_force(const MaccepaParams& p, double q, double theta1, double theta2) {
  return p.spring_constant * detail::spring_geometry(p, q, theta1, theta2).stretch;
}

// Elastic energy stored in the spring. Its negative q-gradient is exactly
// the spring torque above, which keeps the energy accounting consistent.
inline double spring_energy(const MaccepaParams& p, double q, double theta1, double theta2) {
  const double s = detail::spring_geometry(p, q, theta1, theta2).stretch;
  return 0.5 * p.spring_constant * s * s;
}

// Joint stiffness d tau_s / d theta1 = -d tau_s / d q; positive in the
// operating region.
inline double joint_stiffness(const MaccepaParams& p, double q, double theta1, double theta2) {
  const auto g = detail::spring_geometry(p, q, theta1, theta2);
  const double bc = p.lever_arm * p.anchor_distance;
  const double offset = p.drum_radius * theta2 - (p.anchor_distance - p.lever_arm);
  const double a3 = g.chord * g.chord * g.chord;
  return p.spring_constant * bc * g.cos_phi * (1.0 + offset / g.chord) -
         p.spring_constant * bc * bc * g.sin_phi * g.sin_phi * offset / a3;
}

struct MaccepaModel {
  static constexpr int state_dim = 6;
  using State = Eigen::Matrix<double, 6, 1>;  // q, qdot, theta1, theta2, theta1dot, theta2dot

  MaccepaParams params;

  State derivative(const State& x, const ControlInput& u) const {
    const double tau_s = spring_torque(params, x[0], x[2], x[3]);
    const double d = detail::damping_coefficient_sat(params.damping, u.damping);
    const double beta = params.servo_bandwidth;
    State dx;
    dx[0] = x[1];
    dx[1] = (tau_s - (d + params.joint_friction) * x[1] - params.external_torque) / params.link_inertia;
    dx[2] = x[4];
    dx[3] = x[5];
    dx[4] = beta * beta * (u.equilibrium - x[2]) - 2.0 * beta * x[4];
    dx[5] = beta * beta * (u.stiffness - x[3]) - 2.0 * beta * x[5];
    return dx;
  }

  PowerSample powers(const State& x, const ControlInput& u) const {
    const auto g = detail::spring_geometry(params, x[0], x[2], x[3]);
    const double bc = p_bc();
    const double offset = params.drum_radius * x[3] - (params.anchor_distance - params.lever_arm);
    const double tau_s = params.spring_constant * bc * g.sin_phi * (1.0 + offset / g.chord);
    const double force = params.spring_constant * g.stretch;
    PowerSample p;
    p.damping_coeff = detail::damping_coefficient_sat(params.damping, u.damping);
    p.regen = detail::regen_coefficient_sat(params.damping, u.damping) * x[1] * x[1];
    p.output = tau_s * x[1];
    p.motor1 = tau_s * x[4];                        // -tau1 * theta1dot, tau1 = -tau_s
    p.motor2 = params.drum_radius * force * x[5];   // -tau2 * theta2dot, tau2 = -r * F_s
    p.spring_force = force;
    return p;
  }

  ControlBounds default_bounds() const {
    return {{params.equilibrium_bounds[0], params.pretension_bounds[0], 0.0},
            {params.equilibrium_bounds[1], params.pretension_bounds[1], 1.0}};
  }

 private:
  double p_bc() const { return params.lever_arm * params.anchor_distance; }
};

// ---------------------------------------------------------------------------
// Integration

// Classical 4th-order Runge-Kutta step with the control held constant.
template <class Derivative, class State>
State rk4_step(Derivative&& f, const State& x, const ControlInput& u, double h) {
  const State k1 = f(x, u);
  const State k2 = f(State(x + (0.5 * h) * k1), u);
  const State k3 = f(State(x + (0.5 * h) * k2), u);
  const State k4 = f(State(x + h * k3), u);
  return State(x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

template <class Model>
struct Trajectory {
  double step = 0.0;         // integrator substep, s
  double control_step = 0.0; // control period, s
  int substeps = 1;
  std::vector<typename Model::State> states;   // one per substep sample
  std::vector<ControlInput> controls;          // one per control period
  std::vector<PowerSample> powers;             // one per state sample
  bool diverged = false;

  std::size_t samples() const { return states.size(); }
  double time(std::size_t i) const { return static_cast<double>(i) * step; }
  double duration() const { return states.empty() ? 0.0 : time(states.size() - 1); }
  double q(std::size_t i) const { return states[i][0]; }
  double qdot(std::size_t i) const { return states[i][1]; }

  // Control active at sample i; the sample at a period boundary reports the
  // incoming period's control.
  const ControlInput& control_at(std::size_t i) const {
    static const ControlInput zero{};
    if (controls.empty()) return zero;
    const std::size_t k = i / static_cast<std::size_t>(substeps);
    return controls[std::min(k, controls.size() - 1)];
  }
};

// Integrates the model under a zero-order-hold control sequence. Each control
// is held for control_dt and integrated with `substeps` RK4 steps. If the
// state leaves the finite range the trajectory is truncated and flagged.
template <class Model>
Trajectory<Model> rollout(const Model& model, const typename Model::State& x0,
                          std::span<const ControlInput> controls, double control_dt, int substeps) {
  if (!(control_dt > 0.0)) throw std::invalid_argument("rollout: control_dt must be > 0");
  if (substeps < 1) throw std::invalid_argument("rollout: substeps must be >= 1");

  Trajectory<Model> traj;
  traj.control_step = control_dt;
  traj.substeps = substeps;
  traj.step = control_dt / substeps;
  traj.controls.assign(controls.begin(), controls.end());
  traj.states.reserve(controls.size() * substeps + 1);
  traj.powers.reserve(controls.size() * substeps + 1);

  traj.states.push_back(x0);
  traj.powers.push_back(controls.empty() ? PowerSample{} : model.powers(x0, controls[0]));

  auto f = [&model](const typename Model::State& x, const ControlInput& u) { return model.derivative(x, u); };
  typename Model::State x = x0;
  for (const ControlInput& u : traj.controls) {
    for (int s = 0; s < substeps; ++s) {
      x = rk4_step(f, x, u, traj.step);
      if (!x.allFinite()) {
        traj.diverged = true;
        return traj;
      }
      traj.states.push_back(x);
      traj.powers.push_back(model.powers(x, u));
    }
  }
  return traj;
}

}  // namespace via
