#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "via/dynamics.hpp"

namespace via {

enum class CostVariant { PendulumReaching, MaccepaReaching };

// Running-cost weights for the two reaching tasks. The weight meanings follow
// the task definition: w1 scales reaching error for both variants; for the
// pendulum w2 penalises equilibrium-command offset, w3 squared stiffness
// command and w4 rewards regeneration power; for the MACCEPA w2 penalises
// squared spring force, w3 deviation of the damping command from the
// regeneration optimum and w4 is a control regulariser.
struct CostWeights {
  CostVariant variant = CostVariant::PendulumReaching;
  double w1 = 0.0, w2 = 0.0, w3 = 0.0, w4 = 0.0;
  double target = 0.0;   // q*, rad
  double horizon = 0.0;  // t_f, s

  static CostWeights pendulum_reaching(double target, double horizon = 2.0) {
    return {CostVariant::PendulumReaching, 1000.0, 1.0, 1.0, 0.01, target, horizon};
  }
  static CostWeights maccepa_reaching(double target, double horizon = 1.5) {
    return {CostVariant::MaccepaReaching, 1000.0, 1.0, 500.0, 1e-6, target, horizon};
  }

  void validate() const {
    if (!(w1 >= 0.0 && w2 >= 0.0 && w3 >= 0.0 && w4 >= 0.0))
      throw std::invalid_argument("CostWeights: weights must be >= 0");
    if (!(horizon > 0.0)) throw std::invalid_argument("CostWeights: horizon must be > 0");
  }
};

inline double running_cost(const PendulumModel& m, const PendulumModel::State& x, const ControlInput& u,
                           const CostWeights& w) {
  const double err = x[0] - w.target;
  const double eq = u.equilibrium - w.target;
  const double regen = detail::regen_coefficient_sat(m.params.damping, u.damping) * x[1] * x[1];
  return w.w1 * err * err + w.w2 * eq * eq + w.w3 * u.stiffness * u.stiffness - w.w4 * regen;
}

inline double running_cost(const MaccepaModel& m, const MaccepaModel::State& x, const ControlInput& u,
                           const CostWeights& w) {
  const double err = x[0] - w.target;
  const double force = spring_force(m.params, x[0], x[2], x[3]);
  const double dev = u.damping - m.params.damping.split_point;
  const double uu = u.equilibrium * u.equilibrium + u.stiffness * u.stiffness + u.damping * u.damping;
  return w.w1 * err * err + w.w2 * force * force + w.w3 * dev * dev + w.w4 * uu;
}

// Second-order expansion of the running cost around (x, u). The regeneration
// term is piecewise linear in the damping command; at the split-point kink
// the slope is the mean of the one-sided slopes (the value a central
// difference straddling the kink yields) and the curvature is zero.
template <int N>
struct CostExpansion {
  double value = 0.0;
  Eigen::Matrix<double, N, 1> x_grad = Eigen::Matrix<double, N, 1>::Zero();
  Eigen::Matrix<double, 3, 1> u_grad = Eigen::Matrix<double, 3, 1>::Zero();
  Eigen::Matrix<double, N, N> xx = Eigen::Matrix<double, N, N>::Zero();
  Eigen::Matrix<double, 3, 3> uu = Eigen::Matrix<double, 3, 3>::Zero();
  Eigen::Matrix<double, 3, N> ux = Eigen::Matrix<double, 3, N>::Zero();
};

inline CostExpansion<2> quadratize_cost(const PendulumModel& m, const PendulumModel::State& x,
                                        const ControlInput& u, const CostWeights& w) {
  CostExpansion<2> c;
  c.value = running_cost(m, x, u, w);
  const double p0 = detail::regen_coefficient_sat(m.params.damping, u.damping);
  const double p0_slope = detail::regen_coefficient_slope(m.params.damping, u.damping);
  c.x_grad[0] = 2.0 * w.w1 * (x[0] - w.target);
  c.x_grad[1] = -2.0 * w.w4 * p0 * x[1];
  c.xx(0, 0) = 2.0 * w.w1;
  c.xx(1, 1) = -2.0 * w.w4 * p0;
  c.u_grad[0] = 2.0 * w.w2 * (u.equilibrium - w.target);
  c.u_grad[1] = 2.0 * w.w3 * u.stiffness;
  c.u_grad[2] = -w.w4 * p0_slope * x[1] * x[1];
  c.uu(0, 0) = 2.0 * w.w2;
  c.uu(1, 1) = 2.0 * w.w3;
  c.ux(2, 1) = -2.0 * w.w4 * p0_slope * x[1];
  return c;
}

inline CostExpansion<6> quadratize_cost(const MaccepaModel& m, const MaccepaModel::State& x,
                                        const ControlInput& u, const CostWeights& w) {
  CostExpansion<6> c;
  c.value = running_cost(m, x, u, w);
  const auto& p = m.params;
  const auto g = detail::spring_geometry(p, x[0], x[2], x[3]);
  const double force = p.spring_constant * g.stretch;
  const double da_dtheta1 = p.lever_arm * p.anchor_distance * g.sin_phi / g.chord;
  // Spring-force gradient over (q, theta1, theta2); Gauss-Newton curvature.
  Eigen::Matrix<double, 6, 1> fgrad = Eigen::Matrix<double, 6, 1>::Zero();
  fgrad[0] = -p.spring_constant * da_dtheta1;
  fgrad[2] = p.spring_constant * da_dtheta1;
  fgrad[3] = p.spring_constant * p.drum_radius;
  c.x_grad = 2.0 * w.w2 * force * fgrad;
  c.x_grad[0] += 2.0 * w.w1 * (x[0] - w.target);
  c.xx = 2.0 * w.w2 * fgrad * fgrad.transpose();
  c.xx(0, 0) += 2.0 * w.w1;
  c.u_grad[0] = 2.0 * w.w4 * u.equilibrium;
  c.u_grad[1] = 2.0 * w.w4 * u.stiffness;
  c.u_grad[2] = 2.0 * w.w3 * (u.damping - p.damping.split_point) + 2.0 * w.w4 * u.damping;
  c.uu.diagonal() << 2.0 * w.w4, 2.0 * w.w4, 2.0 * w.w3 + 2.0 * w.w4;
  return c;
}

// ---------------------------------------------------------------------------

// Integrates one control period without recording powers.
template <class Model>
typename Model::State step_period(const Model& model, typename Model::State x, const ControlInput& u,
                                  double control_dt, int substeps) {
  const double h = control_dt / substeps;
  auto f = [&model](const typename Model::State& s, const ControlInput& c) { return model.derivative(s, c); };
  for (int i = 0; i < substeps; ++i) x = rk4_step(f, x, u, h);
  return x;
}

// Discretization of the one-control-period map used inside the solver. The
// executed trajectory is always integrated with substepped RK4; planning on
// the first-order map reproduces the classic plan/execute mismatch of
// early iLQR pipelines.
enum class PlannerModel { Exact, FirstOrder };

template <class Model>
typename Model::State planner_step(const Model& model, const typename Model::State& x, const ControlInput& u,
                                   double control_dt, int substeps, PlannerModel scheme) {
  if (scheme == PlannerModel::FirstOrder)
    return typename Model::State(x + control_dt * model.derivative(x, u));
  return step_period(model, x, u, control_dt, substeps);
}

template <class Model>
struct Linearization {
  Eigen::Matrix<double, Model::state_dim, Model::state_dim> state_jac;
  Eigen::Matrix<double, Model::state_dim, Eigen::Dynamic> control_jac;
};

// Central finite differences of the discrete one-control-period map. The
// control Jacobian only carries columns for the requested channels.
template <class Model>
Linearization<Model> linearize(const Model& model, const typename Model::State& x, const ControlInput& u,
                               double control_dt, int substeps, std::span<const int> channels,
                               double h_fd = 1e-6, PlannerModel scheme = PlannerModel::Exact) {
  if (!(h_fd > 0.0)) throw std::invalid_argument("linearize: h_fd must be > 0");
  constexpr int n = Model::state_dim;
  Linearization<Model> lin;
  lin.control_jac.resize(n, static_cast<int>(channels.size()));
  for (int i = 0; i < n; ++i) {
    typename Model::State xp = x, xm = x;
    xp[i] += h_fd;
    xm[i] -= h_fd;
    lin.state_jac.col(i) = (planner_step(model, xp, u, control_dt, substeps, scheme) -
                            planner_step(model, xm, u, control_dt, substeps, scheme)) /
                           (2.0 * h_fd);
  }
  int col = 0;
  for (int ch : channels) {
    ControlInput up = u, um = u;
    up[ch] += h_fd;
    um[ch] -= h_fd;
    lin.control_jac.col(col++) = (planner_step(model, x, up, control_dt, substeps, scheme) -
                                  planner_step(model, x, um, control_dt, substeps, scheme)) /
                                 (2.0 * h_fd);
  }
  if (!lin.state_jac.allFinite() || !lin.control_jac.allFinite())
    throw std::runtime_error("linearize: non-finite Jacobian entries");
  return lin;
}

// ---------------------------------------------------------------------------

template <class Model>
struct OptimizationProblem {
  Model model;
  typename Model::State initial_state = Model::State::Zero();
  CostWeights weights;
  double control_dt = 0.02;
  int substeps = 10;
  ControlBounds bounds;
  // Channels held at a constant value and excluded from the decision space.
  std::array<std::optional<double>, 3> frozen{};
  // Optional explicit warm start; entries beyond steps() are ignored and
  // missing ones fall back to warm_start().
  std::vector<ControlInput> initial_controls;

  OptimizationProblem() : bounds{} {}
  OptimizationProblem(Model m, typename Model::State x0, CostWeights w)
      : model(std::move(m)), initial_state(std::move(x0)), weights(w), bounds(model.default_bounds()) {}

  int steps() const { return static_cast<int>(std::lround(weights.horizon / control_dt)); }

  std::vector<int> free_channels() const {
    std::vector<int> out;
    for (int i = 0; i < 3; ++i)
      if (!frozen[i]) out.push_back(i);
    return out;
  }

  // Warm start: equilibrium at the target, stiffness mid-range, damping at
  // the regeneration optimum; frozen channels at their constants.
  ControlInput warm_start() const {
    ControlInput u;
    u.equilibrium = std::clamp(weights.target, bounds.lower[0], bounds.upper[0]);
    u.stiffness = 0.5 * (bounds.lower[1] + bounds.upper[1]);
    u.damping = model.params.damping.split_point;
    u = bounds.clamp(u);
    for (int i = 0; i < 3; ++i)
      if (frozen[i]) u[i] = *frozen[i];
    return u;
  }
};

struct SolveOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;        // relative cost change
  double reg_init = 1e-6;         // Levenberg regularization schedule
  double reg_increase = 10.0;
  double reg_decrease = 0.5;
  double reg_floor = 1e-12;
  double reg_cap = 1e10;
  double jac_step = 1e-6;
  int max_line_search = 10;
  PlannerModel planner = PlannerModel::Exact;
};

enum class SolveStatus { Converged, MaxIterations, RegularizationCap, Diverged };

template <class Model>
struct Solution {
  std::vector<ControlInput> controls;
  Trajectory<Model> trajectory;
  std::vector<double> cost_history;  // initial cost, then one entry per accepted iteration
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  SolveStatus status = SolveStatus::MaxIterations;
};

// Total discrete cost of a control sequence: sum of the running cost at the
// control-period boundaries times the period.
template <class Model>
double total_cost(const OptimizationProblem<Model>& problem, std::span<const ControlInput> controls,
                  PlannerModel scheme = PlannerModel::Exact) {
  typename Model::State x = problem.initial_state;
  double j = 0.0;
  for (const ControlInput& u : controls) {
    j += running_cost(problem.model, x, u, problem.weights) * problem.control_dt;
    x = planner_step(problem.model, x, u, problem.control_dt, problem.substeps, scheme);
    if (!x.allFinite()) return std::numeric_limits<double>::infinity();
  }
  return j;
}

// Open-loop gradient of the total cost with respect to each control, over the
// free channels, via the adjoint recursion. Shares the Jacobian machinery of
// the backward pass; used as a solver diagnostic.
template <class Model>
std::vector<Eigen::VectorXd> cost_gradient(const OptimizationProblem<Model>& problem,
                                           std::span<const ControlInput> controls, double jac_step = 1e-6,
                                           PlannerModel scheme = PlannerModel::Exact) {
  constexpr int n = Model::state_dim;
  const int count = static_cast<int>(controls.size());
  const auto free = problem.free_channels();
  const double dt = problem.control_dt;

  std::vector<typename Model::State> xs(count + 1);
  xs[0] = problem.initial_state;
  for (int k = 0; k < count; ++k)
    xs[k + 1] = planner_step(problem.model, xs[k], controls[k], dt, problem.substeps, scheme);

  std::vector<Eigen::VectorXd> grad(count);
  Eigen::Matrix<double, n, 1> lambda = Eigen::Matrix<double, n, 1>::Zero();
  for (int k = count - 1; k >= 0; --k) {
    const auto lin = linearize(problem.model, xs[k], controls[k], dt, problem.substeps, free, jac_step, scheme);
    const auto c = quadratize_cost(problem.model, xs[k], controls[k], problem.weights);
    Eigen::VectorXd lu(free.size());
    for (std::size_t j = 0; j < free.size(); ++j) lu[static_cast<int>(j)] = c.u_grad[free[j]];
    grad[k] = lu * dt + lin.control_jac.transpose() * lambda;
    lambda = (c.x_grad * dt + lin.state_jac.transpose() * lambda).eval();
  }
  return grad;
}

// Iterative LQR with box-constrained controls: forward rollout, local
// quadratization, Riccati backward pass under a Levenberg-style
// regularization schedule, and a backtracking forward pass that clamps
// controls to their bounds. Returns the best controls found; a diverging
// rollout yields a Diverged status instead of an exception.
template <class Model>
Solution<Model> solve(const OptimizationProblem<Model>& problem, const SolveOptions& opt = {}) {
  constexpr int n = Model::state_dim;
  using State = typename Model::State;
  using MatNN = Eigen::Matrix<double, n, n>;
  using VecN = Eigen::Matrix<double, n, 1>;

  problem.weights.validate();
  const bool variant_ok = (std::is_same_v<Model, PendulumModel> &&
                           problem.weights.variant == CostVariant::PendulumReaching) ||
                          (std::is_same_v<Model, MaccepaModel> &&
                           problem.weights.variant == CostVariant::MaccepaReaching);
  if (!variant_ok) throw std::invalid_argument("solve: cost variant does not match the model");
  for (int i = 0; i < 3; ++i)
    if (problem.frozen[i] && (*problem.frozen[i] < problem.bounds.lower[i] - 1e-12 ||
                              *problem.frozen[i] > problem.bounds.upper[i] + 1e-12))
      throw std::invalid_argument("solve: frozen channel value outside bounds");

  const int steps = problem.steps();
  const double dt = problem.control_dt;
  Solution<Model> sol;

  if (steps == 0) {
    sol.converged = true;
    sol.status = SolveStatus::Converged;
    sol.trajectory = rollout(problem.model, problem.initial_state, {}, dt, problem.substeps);
    sol.cost_history = {0.0};
    return sol;
  }

  const auto free = problem.free_channels();
  const int m = static_cast<int>(free.size());

  std::vector<ControlInput> controls(steps, problem.warm_start());
  for (std::size_t k = 0; k < controls.size() && k < problem.initial_controls.size(); ++k) {
    ControlInput u = problem.bounds.clamp(problem.initial_controls[k]);
    for (int i = 0; i < 3; ++i)
      if (problem.frozen[i]) u[i] = *problem.frozen[i];
    controls[k] = u;
  }
  auto roll_boundaries = [&](const std::vector<ControlInput>& us, std::vector<State>& out) {
    out.resize(us.size() + 1);
    out[0] = problem.initial_state;
    for (std::size_t k = 0; k < us.size(); ++k) {
      out[k + 1] = planner_step(problem.model, out[k], us[k], dt, problem.substeps, opt.planner);
      if (!out[k + 1].allFinite()) return false;
    }
    return true;
  };
  auto sequence_cost = [&](const std::vector<State>& xs, const std::vector<ControlInput>& us) {
    double j = 0.0;
    for (std::size_t k = 0; k < us.size(); ++k) j += running_cost(problem.model, xs[k], us[k], problem.weights) * dt;
    return j;
  };
  auto finalize = [&](double cost, SolveStatus status, int iters) {
    sol.controls = controls;
    sol.trajectory = rollout(problem.model, problem.initial_state,
                             std::span<const ControlInput>(controls), dt, problem.substeps);
    sol.final_cost = cost;
    sol.status = status;
    sol.converged = status == SolveStatus::Converged;
    sol.iterations = iters;
  };

  std::vector<State> xs;
  if (!roll_boundaries(controls, xs)) {
    finalize(std::numeric_limits<double>::infinity(), SolveStatus::Diverged, 0);
    return sol;
  }
  double cost = sequence_cost(xs, controls);
  sol.cost_history.push_back(cost);

  if (m == 0) {
    finalize(cost, SolveStatus::Converged, 0);
    return sol;
  }

  std::vector<Linearization<Model>> lins(steps);
  std::vector<CostExpansion<n>> cexp(steps);
  std::vector<Eigen::VectorXd> ff(steps, Eigen::VectorXd::Zero(m));
  std::vector<Eigen::MatrixXd> fb(steps, Eigen::MatrixXd::Zero(m, n));
  bool derivatives_valid = false;

  double mu = opt.reg_init;
  SolveStatus status = SolveStatus::MaxIterations;
  int iter = 0;
  for (; iter < opt.max_iterations; ++iter) {
    if (!derivatives_valid) {
      try {
        for (int k = 0; k < steps; ++k) {
          lins[k] =
              linearize(problem.model, xs[k], controls[k], dt, problem.substeps, free, opt.jac_step, opt.planner);
          cexp[k] = quadratize_cost(problem.model, xs[k], controls[k], problem.weights);
        }
      } catch (const std::runtime_error&) {
        status = SolveStatus::Diverged;
        break;
      }
      derivatives_valid = true;
    }

    // Backward pass; bump the regularization until the recursion succeeds.
    double expected_linear = 0.0;
    bool backward_ok = false;
    while (!backward_ok) {
      backward_ok = true;
      expected_linear = 0.0;
      VecN vx = VecN::Zero();
      MatNN vxx = MatNN::Zero();
      for (int k = steps - 1; k >= 0; --k) {
        const auto& a = lins[k].state_jac;
        const auto& b = lins[k].control_jac;
        Eigen::VectorXd lu(m);
        Eigen::MatrixXd luu(m, m), lux(m, n);
        for (int i = 0; i < m; ++i) {
          lu[i] = cexp[k].u_grad[free[i]];
          lux.row(i) = cexp[k].ux.row(free[i]);
          for (int j = 0; j < m; ++j) luu(i, j) = cexp[k].uu(free[i], free[j]);
        }
        const VecN qx = cexp[k].x_grad * dt + a.transpose() * vx;
        const Eigen::VectorXd qu = lu * dt + b.transpose() * vx;
        const MatNN qxx = cexp[k].xx * dt + a.transpose() * vxx * a;
        const Eigen::MatrixXd quu = luu * dt + b.transpose() * vxx * b;
        const Eigen::MatrixXd qux = lux * dt + b.transpose() * vxx * a;
        Eigen::MatrixXd quu_reg = quu;
        quu_reg.diagonal().array() += mu;
        Eigen::LLT<Eigen::MatrixXd> llt(quu_reg);
        if (llt.info() != Eigen::Success) {
          backward_ok = false;
          mu *= opt.reg_increase;
          if (mu > opt.reg_cap) break;
          break;
        }
        ff[k] = -llt.solve(qu);
        fb[k] = -llt.solve(qux);
        expected_linear += ff[k].dot(qu);
        vx = qx + fb[k].transpose() * quu * ff[k] + fb[k].transpose() * qu + qux.transpose() * ff[k];
        vxx = qxx + fb[k].transpose() * quu * fb[k] + fb[k].transpose() * qux + qux.transpose() * fb[k];
        vxx = 0.5 * (vxx + vxx.transpose()).eval();
      }
      if (!backward_ok && mu > opt.reg_cap) break;
    }
    if (!backward_ok) {
      status = SolveStatus::RegularizationCap;
      break;
    }

    if (std::abs(expected_linear) < opt.tolerance * std::max(1.0, std::abs(cost))) {
      status = SolveStatus::Converged;
      break;
    }

    // Forward pass with backtracking line search and clamping.
    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < opt.max_line_search; ++ls, alpha *= 0.5) {
      std::vector<ControlInput> cand(steps);
      std::vector<State> cand_xs(steps + 1);
      cand_xs[0] = problem.initial_state;
      bool ok = true;
      for (int k = 0; k < steps; ++k) {
        const VecN dx = cand_xs[k] - xs[k];
        const Eigen::VectorXd du = alpha * ff[k] + fb[k] * dx;
        ControlInput u = controls[k];
        for (int i = 0; i < m; ++i) u[free[i]] += du[i];
        u = problem.bounds.clamp(u);
        for (int i = 0; i < 3; ++i)
          if (problem.frozen[i]) u[i] = *problem.frozen[i];
        cand[k] = u;
        cand_xs[k + 1] = planner_step(problem.model, cand_xs[k], u, dt, problem.substeps, opt.planner);
        if (!cand_xs[k + 1].allFinite()) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      const double cand_cost = sequence_cost(cand_xs, cand);
      if (cand_cost < cost) {
        const double rel_change = (cost - cand_cost) / std::max(1.0, std::abs(cost));
        controls.swap(cand);
        xs.swap(cand_xs);
        cost = cand_cost;
        sol.cost_history.push_back(cost);
        derivatives_valid = false;
        mu = std::max(opt.reg_floor, mu * opt.reg_decrease);
        accepted = true;
        if (rel_change < opt.tolerance) status = SolveStatus::Converged;
        break;
      }
    }
    if (!accepted) {
      mu *= opt.reg_increase;
      if (mu > opt.reg_cap) {
        status = SolveStatus::RegularizationCap;
        break;
      }
      continue;
    }
    if (status == SolveStatus::Converged) {
      ++iter;
      break;
    }
  }

  finalize(cost, status, iter);
  return sol;
}

}  // namespace via
