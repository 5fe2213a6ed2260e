#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "via/energy.hpp"
#include "via/io.hpp"
#include "via/prng.hpp"

using Catch::Approx;
using namespace via;

namespace {

PendulumModel toy_model(DampingScheme scheme = DampingScheme::Hybrid) {
  IdealPendulumParams p;
  p.damping = DampingConfig::from_limits(scheme, 50.0, 0.5);
  return PendulumModel{p};
}

MaccepaModel hardware_model() {
  MaccepaParams p;
  const MotorParams motor{40.0, 0.0212, 21.2};
  p.damping = DampingConfig::from_motor(DampingScheme::Hybrid, motor, StorageParams::from(motor, 25.3));
  return MaccepaModel{p};
}

// A reaching-like maccepa rollout for the integral identities.
Trajectory<MaccepaModel> reaching_rollout(int substeps = 10) {
  const auto model = hardware_model();
  MaccepaModel::State x0 = MaccepaModel::State::Zero();
  x0[3] = kPi / 6.0;
  std::vector<ControlInput> controls(75);
  for (std::size_t k = 0; k < controls.size(); ++k) {
    const double t = k * 0.02;
    controls[k] = {0.8 * (1.0 - std::exp(-4.0 * t)), kPi / 6.0 + 0.3 * std::sin(2.0 * t), 0.4 + 0.2 * std::sin(3.0 * t)};
  }
  return rollout(model, x0, controls, 0.02, substeps);
}

}  // namespace

TEST_CASE("zero-velocity trajectory does no work") {
  const auto model = toy_model();
  const std::vector<ControlInput> controls(25, ControlInput{0.3, 0.6, 0.4});
  const auto traj = rollout(model, PendulumModel::State{0.3, 0.0}, controls, 0.02, 10);
  CHECK(mechanical_work(traj) == 0.0);
}

TEST_CASE("trapezoid integration on constant power") {
  Trajectory<PendulumModel> traj;
  traj.step = 0.02;
  traj.control_step = 0.02;
  traj.substeps = 1;
  traj.states.resize(2, PendulumModel::State::Zero());
  traj.powers.resize(2);
  traj.powers[0].output = 2.0;
  traj.powers[1].output = 2.0;
  CHECK(mechanical_work(traj) == Approx(0.04).margin(1e-15));  // 2 W over one 0.02 s step

  Trajectory<PendulumModel> unit;
  unit.step = 0.01;
  unit.states.resize(101, PendulumModel::State::Zero());
  unit.powers.resize(101);
  for (auto& p : unit.powers) p.regen = 1.0;
  CHECK(regenerated_energy(unit) == Approx(1.0).margin(1e-12));  // 1 W held for 1 s
}

TEST_CASE("dynamic braking trajectories regenerate nothing") {
  const auto model = toy_model(DampingScheme::Dynamic);
  const std::vector<ControlInput> controls(50, ControlInput{kPi / 3.0, 0.8, 0.6});
  const auto traj = rollout(model, PendulumModel::State::Zero(), controls, 0.02, 10);
  CHECK(regenerated_energy(traj) == 0.0);
  CHECK(energy_report(traj).ratio == 0.0);
}

TEST_CASE("hybrid braking at full command regenerates nothing") {
  const auto model = toy_model();
  const std::vector<ControlInput> controls(50, ControlInput{kPi / 3.0, 0.8, 1.0});
  const auto traj = rollout(model, PendulumModel::State::Zero(), controls, 0.02, 10);
  CHECK(regenerated_energy(traj) == Approx(0.0).margin(1e-12));
}

TEST_CASE("hybrid braking below full command regenerates a bounded share") {
  const auto model = toy_model();
  const std::vector<ControlInput> controls(100, ControlInput{kPi / 3.0, 0.8, 0.5});
  const auto traj = rollout(model, PendulumModel::State::Zero(), controls, 0.02, 10);
  const auto report = energy_report(traj);
  CHECK(report.regenerated > 0.0);
  CHECK(report.ratio > 0.0);
  CHECK(report.ratio <= 1.0);
  CHECK(report.net == report.work - report.regenerated);  // exact by construction
}

TEST_CASE("motionless servos consume nothing") {
  const auto model = hardware_model();
  MaccepaModel::State x0;
  x0 << 0.5, 0.0, 0.0, kPi / 6.0, 0.0, 0.0;  // joint displaced, servos parked at their commands
  const std::vector<ControlInput> controls(50, ControlInput{0.0, kPi / 6.0, 0.5});
  const auto traj = rollout(model, x0, controls, 0.02, 10);
  CHECK(consumed_energy(traj) == 0.0);
  CHECK(consumed_energy(traj, ConsumptionMode::Raw) == 0.0);
}

TEST_CASE("pendulum trajectories cannot be metered for consumption") {
  const auto model = toy_model();
  const std::vector<ControlInput> controls(5, ControlInput{0.0, 0.5, 0.5});
  const auto traj = rollout(model, PendulumModel::State::Zero(), controls, 0.02, 10);
  CHECK_THROWS_AS(consumed_energy(traj), std::invalid_argument);
}

TEST_CASE("power-flow identity holds pointwise along maccepa rollouts") {
  const auto traj = reaching_rollout();
  REQUIRE_FALSE(traj.diverged);
  CHECK(max_power_balance_residual(traj, hardware_model().params) < 1e-6);
}

TEST_CASE("raw consumption minus work tracks the spring energy change") {
  const auto traj = reaching_rollout();
  const auto& params = hardware_model().params;
  const double e_in_raw = consumed_energy(traj, ConsumptionMode::Raw);
  const double work = mechanical_work(traj);
  const auto& first = traj.states.front();
  const auto& last = traj.states.back();
  const double delta_es = spring_energy(params, last[0], last[2], last[3]) -
                          spring_energy(params, first[0], first[2], first[3]);
  // trapezoids over zero-order-hold power samples leave an O(h) residual at
  // control switches; 2e-5 is four times the observed residual at h = 2 ms
  CHECK(e_in_raw - work == Approx(delta_es).margin(2e-5));
}

TEST_CASE("tenfold grid refinement barely moves the integrals") {
  const auto coarse = reaching_rollout(10);
  const auto fine = reaching_rollout(100);
  const double w_c = mechanical_work(coarse), w_f = mechanical_work(fine);
  const double r_c = regenerated_energy(coarse), r_f = regenerated_energy(fine);
  const double c_c = consumed_energy(coarse), c_f = consumed_energy(fine);
  CHECK(std::abs(w_c - w_f) < 1e-3 * std::max(1.0, std::abs(w_f)));
  CHECK(std::abs(r_c - r_f) < 1e-3 * std::max(1.0, std::abs(r_f)));
  CHECK(std::abs(c_c - c_f) < 1e-3 * std::max(1.0, std::abs(c_f)));
}

TEST_CASE("energy report serializes the mandated fields") {
  EnergyReport r;
  r.work = 1.5;
  r.regenerated = 0.5;
  r.net = 1.0;
  r.ratio = 0.5 / 1.5;
  r.consumed = 2.0;
  const Json j = r;
  CHECK(j.at("E") == 1.5);
  CHECK(j.at("E_rege") == 0.5);
  CHECK(j.at("E_net") == 1.0);
  CHECK(j.at("eta") == Approx(1.0 / 3.0));
  CHECK(j.at("E_in") == 2.0);
}
