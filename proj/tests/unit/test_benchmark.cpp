#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "via/benchmark.hpp"

using Catch::Approx;
using namespace via;

namespace {

MaccepaModel hardware_model() {
  MaccepaParams p;
  const MotorParams motor{40.0, 0.0212, 21.2};
  p.damping = DampingConfig::from_motor(DampingScheme::Hybrid, motor, StorageParams::from(motor, 25.3));
  return MaccepaModel{p};
}

BenchmarkOptions small_options() {
  BenchmarkOptions opt;
  opt.movements_per_trial = 3;
  opt.trials = 1;
  opt.seed = 99;
  opt.solver.max_iterations = 40;
  return opt;
}

// Synthetic single-state-dimension trajectories for metric tests.
Trajectory<PendulumModel> synthetic(const std::vector<double>& q, const std::vector<double>& qdot, double h) {
  Trajectory<PendulumModel> t;
  t.step = h;
  t.control_step = h;
  t.substeps = 1;
  for (std::size_t i = 0; i < q.size(); ++i) {
    t.states.push_back(PendulumModel::State{q[i], qdot[i]});
    t.powers.push_back({});
  }
  return t;
}

}  // namespace

TEST_CASE("target generation is deterministic, in range, and gapped") {
  const double lo = -kPi / 3.0, hi = kPi / 3.0, gap = kPi / 3.0;
  const auto a = generate_targets(12345, 25, lo, hi, gap);
  const auto b = generate_targets(12345, 25, lo, hi, gap);
  REQUIRE(a.targets.size() == 25);
  CHECK(a.targets == b.targets);
  for (std::size_t i = 0; i < a.targets.size(); ++i) {
    CHECK(a.targets[i] >= lo);
    CHECK(a.targets[i] <= hi);
    if (i > 0) CHECK(std::abs(a.targets[i] - a.targets[i - 1]) >= gap);
  }
  const auto c = generate_targets(54321, 25, lo, hi, gap);
  CHECK(a.targets != c.targets);
  CHECK_THROWS_AS(generate_targets(1, 5, lo, hi, hi - lo), std::invalid_argument);
}

TEST_CASE("settling time of a constant trajectory is the first sample") {
  const auto traj = synthetic(std::vector<double>(20, 0.4), std::vector<double>(20, 0.0), 0.02);
  CHECK(settling_time(traj, 1e-3, 1e-3) == 0.0);
}

TEST_CASE("a persistently oscillating trajectory never settles") {
  std::vector<double> q(101), qdot(101);
  for (int i = 0; i <= 100; ++i) {
    q[i] = std::sin(0.2 * i);
    qdot[i] = 10.0 * std::cos(0.2 * i);
  }
  const auto traj = synthetic(q, qdot, 0.02);
  CHECK(settling_time(traj, 0.1, 0.1) == Approx(traj.duration()));
}

TEST_CASE("settling time is the start of the quiet tail") {
  // loud for the first 50 samples, quiet afterwards
  std::vector<double> q(101, 0.0), qdot(101, 0.0);
  for (int i = 0; i < 50; ++i) qdot[i] = 5.0;
  qdot[50] = 0.0;  // velocity step ends; acceleration estimate settles two samples later
  const auto traj = synthetic(q, qdot, 0.02);
  const double t = settling_time(traj, 0.1, 0.1);
  CHECK(t >= 49 * 0.02);
  CHECK(t <= 52 * 0.02);
}

TEST_CASE("overshoot is zero without a crossing") {
  std::vector<double> q(50), qdot(50, 0.0);
  for (int i = 0; i < 50; ++i) q[i] = 0.9 * (1.0 - std::exp(-0.1 * i));  // approaches 0.9 from below
  const auto traj = synthetic(q, qdot, 0.02);
  CHECK(overshoot(traj, 1.0, traj.duration()) == 0.0);
}

TEST_CASE("overshoot is zero when the trajectory sits on the target after crossing") {
  std::vector<double> q{0.0, 0.5, 1.0, 1.0, 1.0, 1.0};
  const auto traj = synthetic(q, std::vector<double>(q.size(), 0.0), 0.1);
  CHECK(overshoot(traj, 1.0, traj.duration()) == 0.0);
}

TEST_CASE("overshoot integrates the squared excursion past the target") {
  // crosses the target 1.0 at sample 2, stays at 1.2 until the end
  std::vector<double> q{0.0, 0.6, 1.2, 1.2, 1.2};
  const auto traj = synthetic(q, std::vector<double>(q.size(), 0.0), 0.1);
  // trapezoid of (q - 1)^2 over the two intervals after the crossing sample
  const double expected = 0.5 * (0.04 + 0.04) * 0.1 * 2.0;
  CHECK(overshoot(traj, 1.0, traj.duration()) == Approx(expected).margin(1e-12));
}

TEST_CASE("min-max scores match hand-computed values") {
  const auto lower_better = minmax_scores(std::vector<double>{1.0, 2.0, 3.0, 4.0}, true);
  CHECK(lower_better[0] == 1.0);
  CHECK(lower_better[1] == Approx(2.0 / 3.0));
  CHECK(lower_better[2] == Approx(1.0 / 3.0));
  CHECK(lower_better[3] == 0.0);

  const auto degenerate = minmax_scores(std::vector<double>{0.7, 0.7, 0.7, 0.7}, true);
  for (double s : degenerate) CHECK(s == 1.0);

  // a published regeneration column, higher is better
  const std::vector<double> column{0.152, 0.071, 0.089, 0.092};
  const auto scores = minmax_scores(column, false);
  CHECK(scores[0] == 1.0);
  CHECK(scores[1] == 0.0);
  CHECK(scores[2] == Approx((0.089 - 0.071) / (0.152 - 0.071)));
  CHECK(scores[3] == Approx((0.092 - 0.071) / (0.152 - 0.071)));
}

TEST_CASE("normalized scores require all four conditions and orient every axis") {
  MetricsTable table;
  const double settle[] = {1.064, 0.923, 0.792, 0.780};
  const double over[] = {4.98, 1.05, 0.65, 0.27};
  const double consumed[] = {4.08, 3.989, 3.412, 3.067};
  const double regen[] = {0.152, 0.071, 0.089, 0.092};
  int i = 0;
  for (ReachCondition c : {ReachCondition::FSFD, ReachCondition::FSVD, ReachCondition::VSFD, ReachCondition::VSVD}) {
    ConditionSummary row;
    row.condition = c;
    row.trials = 20;
    row.settle.mean = settle[i];
    row.overshoot.mean = over[i];
    row.consumed.mean = consumed[i];
    row.regenerated.mean = regen[i];
    table.rows.push_back(row);
    ++i;
  }
  const auto scores = normalized_scores(table);
  // best raw value scores exactly 1 on every axis
  CHECK(scores.row(ReachCondition::VSVD).time_score == 1.0);
  CHECK(scores.row(ReachCondition::VSVD).overshoot_score == 1.0);
  CHECK(scores.row(ReachCondition::VSVD).consumption_score == 1.0);
  CHECK(scores.row(ReachCondition::FSFD).regeneration_score == 1.0);
  for (const auto& row : scores.rows) {
    for (double s : {row.time_score, row.overshoot_score, row.consumption_score, row.regeneration_score}) {
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
  }

  MetricsTable incomplete;
  incomplete.rows = {table.rows[0], table.rows[1]};
  CHECK_THROWS_AS(normalized_scores(incomplete), std::invalid_argument);
}

TEST_CASE("fsfd freezes every channel at the published constants") {
  const auto model = hardware_model();
  const auto opt = small_options();
  const auto targets = generate_targets(7, opt.movements_per_trial, opt.target_min, opt.target_max, opt.min_gap);
  std::vector<Trajectory<MaccepaModel>> trajs;
  const auto rec = run_condition(model, ReachCondition::FSFD, targets, CostWeights::maccepa_reaching(0.0), opt,
                                 [&](int, const Trajectory<MaccepaModel>& t) { trajs.push_back(t); });
  REQUIRE(trajs.size() == targets.targets.size());
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    for (const auto& u : trajs[i].controls) {
      CHECK(u.equilibrium == targets.targets[i]);
      CHECK(u.stiffness == kPi / 6.0);
      CHECK(u.damping == 0.5);
    }
  }
  CHECK(rec.failed_movements == 0);
}

TEST_CASE("movements chain exactly") {
  const auto model = hardware_model();
  auto opt = small_options();
  const auto targets = generate_targets(11, opt.movements_per_trial, opt.target_min, opt.target_max, opt.min_gap);
  std::vector<Trajectory<MaccepaModel>> trajs;
  run_condition(model, ReachCondition::VSFD, targets, CostWeights::maccepa_reaching(0.0), opt,
                [&](int, const Trajectory<MaccepaModel>& t) { trajs.push_back(t); });
  REQUIRE(trajs.size() == 3);
  CHECK(trajs[0].states.front() == default_benchmark_state());
  for (std::size_t i = 1; i < trajs.size(); ++i) CHECK(trajs[i].states.front() == trajs[i - 1].states.back());
}

TEST_CASE("trial records are reproducible") {
  const auto model = hardware_model();
  const auto opt = small_options();
  const auto targets = generate_targets(13, opt.movements_per_trial, opt.target_min, opt.target_max, opt.min_gap);
  const auto a = run_condition(model, ReachCondition::FSVD, targets, CostWeights::maccepa_reaching(0.0), opt);
  const auto b = run_condition(model, ReachCondition::FSVD, targets, CostWeights::maccepa_reaching(0.0), opt);
  CHECK(a.mean_settle == b.mean_settle);
  CHECK(a.mean_overshoot == b.mean_overshoot);
  CHECK(a.total_consumed == b.total_consumed);
  CHECK(a.total_regenerated == b.total_regenerated);
  REQUIRE(a.movements.size() == b.movements.size());
  for (std::size_t i = 0; i < a.movements.size(); ++i) {
    CHECK(a.movements[i].settle_time == b.movements[i].settle_time);
    CHECK(a.movements[i].overshoot_value == b.movements[i].overshoot_value);
    CHECK(a.movements[i].energy.regenerated == b.movements[i].energy.regenerated);
  }
}

TEST_CASE("benchmark runs produce one record per condition and trial") {
  const auto model = hardware_model();
  BenchmarkOptions opt = small_options();
  opt.movements_per_trial = 2;
  opt.trials = 2;
  const std::vector<ReachCondition> conditions{ReachCondition::FSFD, ReachCondition::VSFD};
  const auto run = run_benchmark(model, CostWeights::maccepa_reaching(0.0), conditions, opt);
  REQUIRE(run.trials.size() == 4);
  for (const auto& t : run.trials) CHECK(t.movements.size() == 2);
  // same trial index sees the same targets in both conditions
  CHECK(run.trials[0].seed == run.trials[2].seed);
  CHECK(run.trials[1].seed == run.trials[3].seed);
  CHECK(run.trials[0].movements[0].target == run.trials[2].movements[0].target);
}

TEST_CASE("benchmark results are identical for any job count") {
  const auto model = hardware_model();
  BenchmarkOptions opt = small_options();
  opt.movements_per_trial = 2;
  opt.trials = 2;
  const std::vector<ReachCondition> conditions{ReachCondition::FSFD, ReachCondition::FSVD};
  auto serial = opt;
  serial.jobs = 1;
  auto parallel = opt;
  parallel.jobs = 4;
  const auto a = run_benchmark(model, CostWeights::maccepa_reaching(0.0), conditions, serial);
  const auto b = run_benchmark(model, CostWeights::maccepa_reaching(0.0), conditions, parallel);
  REQUIRE(a.trials.size() == b.trials.size());
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].mean_settle == b.trials[i].mean_settle);
    CHECK(a.trials[i].total_regenerated == b.trials[i].total_regenerated);
  }
}
