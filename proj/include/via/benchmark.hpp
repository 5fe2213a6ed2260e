#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "via/energy.hpp"
#include "via/ilqr.hpp"
#include "via/prng.hpp"

namespace via {

// ---------------------------------------------------------------------------
// Target generation

struct TargetList {
  std::uint64_t seed = 0;
  std::vector<double> targets;
};

// Sequential rejection sampling: each target is uniform over [lo, hi] and at
// least min_gap away from the preceding target. The first target has no
// predecessor and is unconstrained. Deterministic for a fixed seed.
inline TargetList generate_targets(std::uint64_t seed, int count, double lo, double hi, double min_gap) {
  if (!(hi > lo)) throw std::invalid_argument("generate_targets: empty range");
  if (!(min_gap < hi - lo)) throw std::invalid_argument("generate_targets: min_gap must be below the range width");
  TargetList list;
  list.seed = seed;
  list.targets.reserve(static_cast<std::size_t>(count));
  Prng rng(seed);
  long attempts = 0;
  while (static_cast<int>(list.targets.size()) < count) {
    if (++attempts > 100'000'000) throw std::runtime_error("generate_targets: rejection sampling stalled");
    const double candidate = rng.uniform(lo, hi);
    if (list.targets.empty() || std::abs(candidate - list.targets.back()) >= min_gap)
      list.targets.push_back(candidate);
  }
  return list;
}

// ---------------------------------------------------------------------------
// Trajectory metrics

// Joint accelerations by central differences of the recorded velocities
// (one-sided at the ends).
template <class Model>
std::vector<double> sampled_accelerations(const Trajectory<Model>& traj) {
  const std::size_t n = traj.samples();
  std::vector<double> acc(n, 0.0);
  if (n < 2) return acc;
  const double h = traj.step;
  acc[0] = (traj.qdot(1) - traj.qdot(0)) / h;
  acc[n - 1] = (traj.qdot(n - 1) - traj.qdot(n - 2)) / h;
  for (std::size_t i = 1; i + 1 < n; ++i) acc[i] = (traj.qdot(i + 1) - traj.qdot(i - 1)) / (2.0 * h);
  return acc;
}

// Smallest sample time from which velocity and acceleration stay inside the
// thresholds for the remainder of the movement; the full duration if that
// never happens.
template <class Model>
double settling_time(const Trajectory<Model>& traj, double eps_vel, double eps_acc) {
  if (traj.samples() == 0) throw std::invalid_argument("settling_time: empty trajectory");
  const auto acc = sampled_accelerations(traj);
  std::size_t first = traj.samples();
  while (first > 0 && std::abs(traj.qdot(first - 1)) < eps_vel && std::abs(acc[first - 1]) < eps_acc) --first;
  if (first == traj.samples()) return traj.duration();
  return traj.time(first);
}

// Integral of the squared deviation from the target between the first
// crossing and the settling time; zero if the target is never crossed. A
// start exactly on the target counts as an immediate crossing.
template <class Model>
double overshoot(const Trajectory<Model>& traj, double target, double settle_time) {
  if (traj.samples() == 0) throw std::invalid_argument("overshoot: empty trajectory");
  const double start_side = traj.q(0) - target;
  std::size_t cross = traj.samples();
  if (start_side == 0.0) {
    cross = 0;
  } else {
    for (std::size_t i = 1; i < traj.samples(); ++i) {
      if ((traj.q(i) - target) * start_side <= 0.0) {
        cross = i;
        break;
      }
    }
  }
  if (cross == traj.samples()) return 0.0;
  const auto settle_index =
      static_cast<std::size_t>(std::clamp<long>(std::lround(settle_time / traj.step), 0, static_cast<long>(traj.samples()) - 1));
  double sum = 0.0;
  for (std::size_t i = cross + 1; i <= settle_index; ++i) {
    const double a = traj.q(i - 1) - target;
    const double b = traj.q(i) - target;
    sum += 0.5 * (a * a + b * b) * traj.step;
  }
  return sum;
}

template <class Model>
double overshoot(const Trajectory<Model>& traj, double target, double eps_vel, double eps_acc) {
  return overshoot(traj, target, settling_time(traj, eps_vel, eps_acc));
}

// ---------------------------------------------------------------------------
// Long-term consecutive-reaching benchmark

enum class ReachCondition { FSFD, FSVD, VSFD, VSVD };

inline const char* condition_name(ReachCondition c) {
  switch (c) {
    case ReachCondition::FSFD: return "FSFD";
    case ReachCondition::FSVD: return "FSVD";
    case ReachCondition::VSFD: return "VSFD";
    case ReachCondition::VSVD: return "VSVD";
  }
  return "?";
}

inline ReachCondition condition_from_name(std::string_view name) {
  if (name == "FSFD") return ReachCondition::FSFD;
  if (name == "FSVD") return ReachCondition::FSVD;
  if (name == "VSFD") return ReachCondition::VSFD;
  if (name == "VSVD") return ReachCondition::VSVD;
  throw std::invalid_argument("unknown condition: " + std::string(name));
}

inline MaccepaModel::State default_benchmark_state(double initial_pretension = kPi / 6.0) {
  MaccepaModel::State x = MaccepaModel::State::Zero();
  x[3] = initial_pretension;
  return x;
}

struct BenchmarkOptions {
  int movements_per_trial = 25;  // N
  int trials = 20;               // M
  std::uint64_t seed = 1;
  double target_min = -kPi / 3.0;
  double target_max = kPi / 3.0;
  double min_gap = kPi / 3.0;
  double horizon = 1.5;  // s per movement
  double control_dt = 0.02;
  int substeps = 10;
  double fixed_pretension = kPi / 6.0;  // u2 under FSFD/FSVD
  double fixed_damping = 0.5;           // u3 under FSFD/VSFD
  double initial_pretension = kPi / 6.0;
  SolveOptions solver;
  int jobs = 1;
};

struct MovementRecord {
  double target = 0.0;
  double settle_time = 0.0;        // s
  double overshoot_value = 0.0;    // rad^2 s
  EnergyReport energy;
  double force_sq_integral = 0.0;  // consumption surrogate, N^2 s
  bool solver_converged = false;
  int solver_iterations = 0;
  double solver_cost = 0.0;
  double balance_residual = 0.0;   // worst pointwise power-flow residual
  bool failed = false;             // dynamics diverged
};

struct TrialRecord {
  ReachCondition condition = ReachCondition::VSVD;
  std::uint64_t seed = 0;
  int trial_index = 0;
  std::vector<MovementRecord> movements;
  double eps_velocity = 0.0;
  double eps_acceleration = 0.0;
  double mean_settle = 0.0;
  double mean_overshoot = 0.0;
  double total_consumed = 0.0;      // accumulated E_in surrogate (squared-force integral)
  double total_servo_work = 0.0;    // accumulated rectified servo work, J
  double total_regenerated = 0.0;
  double max_balance_residual = 0.0;
  int failed_movements = 0;
};

using MovementSink = std::function<void(int movement_index, const Trajectory<MaccepaModel>&)>;

// Runs one trial of consecutive reaching under one condition: each target is
// reached from the previous end state, with channels frozen according to the
// condition (FSFD skips optimization entirely and steps the equilibrium
// command to the target). Velocity/acceleration thresholds are 1% and 1.5%
// of the per-trial maxima.
inline TrialRecord run_condition(const MaccepaModel& model, ReachCondition condition, const TargetList& targets,
                                 const CostWeights& base_weights, const BenchmarkOptions& opt,
                                 const MovementSink& sink = {}) {
  TrialRecord rec;
  rec.condition = condition;
  rec.seed = targets.seed;

  const int steps = static_cast<int>(std::lround(opt.horizon / opt.control_dt));
  MaccepaModel::State x = default_benchmark_state(opt.initial_pretension);
  std::vector<Trajectory<MaccepaModel>> trajectories;
  trajectories.reserve(targets.targets.size());

  for (double target : targets.targets) {
    MovementRecord mr;
    mr.target = target;
    Trajectory<MaccepaModel> traj;
    if (condition == ReachCondition::FSFD) {
      const ControlInput u{target, opt.fixed_pretension, opt.fixed_damping};
      const std::vector<ControlInput> controls(static_cast<std::size_t>(steps), u);
      traj = rollout(model, x, controls, opt.control_dt, opt.substeps);
      mr.solver_converged = true;
    } else {
      CostWeights w = base_weights;
      w.variant = CostVariant::MaccepaReaching;
      w.target = target;
      w.horizon = opt.horizon;
      OptimizationProblem<MaccepaModel> prob(model, x, w);
      prob.control_dt = opt.control_dt;
      prob.substeps = opt.substeps;
      if (condition == ReachCondition::FSVD) {
        prob.frozen[0] = target;
        prob.frozen[1] = opt.fixed_pretension;
      } else if (condition == ReachCondition::VSFD) {
        prob.frozen[2] = opt.fixed_damping;
      }
      Solution<MaccepaModel> s = solve(prob, opt.solver);
      mr.solver_converged = s.converged;
      mr.solver_iterations = s.iterations;
      mr.solver_cost = s.final_cost;
      traj = std::move(s.trajectory);
    }
    mr.failed = traj.diverged;
    if (mr.failed) ++rec.failed_movements;
    if (!traj.states.empty()) x = traj.states.back();
    trajectories.push_back(std::move(traj));
    rec.movements.push_back(mr);
  }

  double vmax = 0.0, amax = 0.0;
  for (const auto& traj : trajectories) {
    for (std::size_t i = 0; i < traj.samples(); ++i) vmax = std::max(vmax, std::abs(traj.qdot(i)));
    for (double a : sampled_accelerations(traj)) amax = std::max(amax, std::abs(a));
  }
  rec.eps_velocity = 0.01 * vmax;
  rec.eps_acceleration = 0.015 * amax;

  int scored = 0;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& traj = trajectories[i];
    MovementRecord& mr = rec.movements[i];
    if (!mr.failed) {
      mr.settle_time = settling_time(traj, rec.eps_velocity, rec.eps_acceleration);
      mr.overshoot_value = overshoot(traj, mr.target, mr.settle_time);
      mr.energy = energy_report(traj);
      mr.force_sq_integral = consumption_surrogate(traj);
      mr.balance_residual = max_power_balance_residual(traj, model.params);
      rec.mean_settle += mr.settle_time;
      rec.mean_overshoot += mr.overshoot_value;
      rec.total_consumed += mr.force_sq_integral;
      rec.total_servo_work += mr.energy.consumed;
      rec.total_regenerated += mr.energy.regenerated;
      rec.max_balance_residual = std::max(rec.max_balance_residual, mr.balance_residual);
      ++scored;
    }
    if (sink) sink(static_cast<int>(i), traj);
  }
  if (scored > 0) {
    rec.mean_settle /= scored;
    rec.mean_overshoot /= scored;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Aggregation across trials

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over trials
};

struct ConditionSummary {
  ReachCondition condition = ReachCondition::VSVD;
  MetricStats settle, overshoot, consumed, regenerated;
  MetricStats servo_work;  // informational; not a radar axis
  int trials = 0;
  int failed_movements = 0;
  double max_balance_residual = 0.0;
};

struct MetricsTable {
  std::vector<ConditionSummary> rows;

  const ConditionSummary& row(ReachCondition c) const {
    for (const auto& r : rows)
      if (r.condition == c) return r;
    throw std::out_of_range("MetricsTable: condition not present");
  }
};

namespace detail {
inline MetricStats stats(const std::vector<double>& values) {
  MetricStats s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double acc = 0.0;
    for (double v : values) acc += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(acc / static_cast<double>(values.size() - 1));
  }
  return s;
}
}  // namespace detail

inline MetricsTable summarize(std::span<const TrialRecord> trials) {
  MetricsTable table;
  for (ReachCondition c :
       {ReachCondition::FSFD, ReachCondition::FSVD, ReachCondition::VSFD, ReachCondition::VSVD}) {
    std::vector<double> settle, over, consumed, regen, work;
    ConditionSummary row;
    row.condition = c;
    for (const auto& t : trials) {
      if (t.condition != c) continue;
      settle.push_back(t.mean_settle);
      over.push_back(t.mean_overshoot);
      consumed.push_back(t.total_consumed);
      regen.push_back(t.total_regenerated);
      work.push_back(t.total_servo_work);
      row.failed_movements += t.failed_movements;
      row.max_balance_residual = std::max(row.max_balance_residual, t.max_balance_residual);
    }
    if (settle.empty()) continue;
    row.trials = static_cast<int>(settle.size());
    row.settle = detail::stats(settle);
    row.overshoot = detail::stats(over);
    row.consumed = detail::stats(consumed);
    row.regenerated = detail::stats(regen);
    row.servo_work = detail::stats(work);
    table.rows.push_back(row);
  }
  return table;
}

// Min-max normalized scores over the four conditions, oriented so that
// higher is better on every axis; a degenerate axis scores 1 everywhere.
struct RadarRow {
  ReachCondition condition = ReachCondition::VSVD;
  double time_score = 0.0;         // gamma_t
  double overshoot_score = 0.0;    // gamma_o
  double consumption_score = 0.0;  // gamma_c
  double regeneration_score = 0.0; // gamma_r
};

struct RadarScores {
  std::vector<RadarRow> rows;

  const RadarRow& row(ReachCondition c) const {
    for (const auto& r : rows)
      if (r.condition == c) return r;
    throw std::out_of_range("RadarScores: condition not present");
  }
  const RadarRow* find(ReachCondition c) const {
    for (const auto& r : rows)
      if (r.condition == c) return &r;
    return nullptr;
  }
};

inline std::vector<double> minmax_scores(std::span<const double> values, bool lower_is_better) {
  const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
  const double mn = *mn_it, mx = *mx_it;
  std::vector<double> out(values.size(), 1.0);
  if (mx == mn) return out;  // degenerate axis
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = lower_is_better ? (mx - values[i]) / (mx - mn) : (values[i] - mn) / (mx - mn);
  return out;
}

inline RadarScores normalized_scores(const MetricsTable& table) {
  if (table.rows.size() != 4) throw std::invalid_argument("normalized_scores: all four conditions required");
  std::vector<double> settle, over, consumed, regen;
  for (const auto& r : table.rows) {
    settle.push_back(r.settle.mean);
    over.push_back(r.overshoot.mean);
    consumed.push_back(r.consumed.mean);
    regen.push_back(r.regenerated.mean);
  }
  const auto t = minmax_scores(settle, true);
  const auto o = minmax_scores(over, true);
  const auto c = minmax_scores(consumed, true);
  const auto g = minmax_scores(regen, false);
  RadarScores scores;
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    scores.rows.push_back({table.rows[i].condition, t[i], o[i], c[i], g[i]});
  return scores;
}

// ---------------------------------------------------------------------------
// Full benchmark driver

struct BenchmarkRun {
  std::vector<TrialRecord> trials;  // condition-major, trial-minor order
  MetricsTable table;
  RadarScores scores;
};

using BenchmarkSink =
    std::function<void(ReachCondition, int trial, int movement, const Trajectory<MaccepaModel>&)>;

// Runs every requested condition over `trials` seeded target lists. All
// conditions see the same target lists. Trials may execute in parallel
// (jobs > 1); records are ordered by (condition, trial), so results do not
// depend on the execution schedule. The sink, when set, may be invoked from
// worker threads (calls are serialized).
inline BenchmarkRun run_benchmark(const MaccepaModel& model, const CostWeights& base_weights,
                                  std::span<const ReachCondition> conditions, const BenchmarkOptions& opt,
                                  const BenchmarkSink& sink = {}) {
  std::vector<TargetList> lists;
  lists.reserve(static_cast<std::size_t>(opt.trials));
  for (int i = 0; i < opt.trials; ++i)
    lists.push_back(generate_targets(derive_seed(opt.seed, static_cast<std::uint64_t>(i)), opt.movements_per_trial,
                                     opt.target_min, opt.target_max, opt.min_gap));

  struct Task {
    ReachCondition condition;
    int trial = 0;
  };
  std::vector<Task> tasks;
  for (ReachCondition c : conditions)
    for (int i = 0; i < opt.trials; ++i) tasks.push_back({c, i});

  std::mutex sink_mutex;
  auto run_task = [&](const Task& task) {
    MovementSink movement_sink;
    if (sink)
      movement_sink = [&, task](int movement, const Trajectory<MaccepaModel>& traj) {
        std::scoped_lock lock(sink_mutex);
        sink(task.condition, task.trial, movement, traj);
      };
    TrialRecord rec = run_condition(model, task.condition, lists[static_cast<std::size_t>(task.trial)],
                                    base_weights, opt, movement_sink);
    rec.trial_index = task.trial;
    return rec;
  };

  BenchmarkRun run;
  run.trials.resize(tasks.size());
  if (opt.jobs <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run.trials[i] = run_task(tasks[i]);
  } else {
    std::size_t next = 0;
    while (next < tasks.size()) {
      const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(opt.jobs), tasks.size() - next);
      std::vector<std::future<TrialRecord>> futures;
      futures.reserve(batch);
      for (std::size_t j = 0; j < batch; ++j)
        futures.push_back(std::async(std::launch::async, run_task, tasks[next + j]));
      for (std::size_t j = 0; j < batch; ++j) run.trials[next + j] = futures[j].get();
      next += batch;
    }
  }
  run.table = summarize(run.trials);
  // radar scores are defined across the full condition set only
  if (run.table.rows.size() == 4) run.scores = normalized_scores(run.table);
  return run;
}

// ---------------------------------------------------------------------------
// Five-scheme pendulum reaching study

enum class ToyScheme { Hybrid, Dynamic, Regenerative, FixedRegenOptimum, CriticallyDamped };

inline const char* scheme_name(ToyScheme s) {
  switch (s) {
    case ToyScheme::Hybrid: return "hybrid";
    case ToyScheme::Dynamic: return "dynamic";
    case ToyScheme::Regenerative: return "regenerative";
    case ToyScheme::FixedRegenOptimum: return "fixed";
    case ToyScheme::CriticallyDamped: return "critical";
  }
  return "?";
}

struct ToyOptions {
  double mass = 1.0;
  double length = 1.0;
  double friction = 0.01;
  double max_stiffness = 200.0;
  std::array<double, 2> equilibrium_bounds = {-kPi / 2.0, kPi / 2.0};
  double max_damping = 50.0;  // shared dynamic/hybrid ceiling
  double alpha = 0.5;
  double split_point = 0.5;
  double critical_stiffness_cmd = 0.5;   // k = 100 Nm/rad at max_stiffness 200
  double critical_damping_value = 20.0;  // Nms/rad, critically damped with k = 100
  CostWeights weights = CostWeights::pendulum_reaching(kPi / 3.0, 2.0);
  double control_dt = 0.02;
  int substeps = 10;
  SolveOptions solver;
};

struct SchemeResult {
  ToyScheme scheme = ToyScheme::Hybrid;
  Solution<PendulumModel> solution;
  EnergyReport energy;
  double settle_time = 0.0;
  double overshoot_value = 0.0;
  bool optimized = false;
};

// Reaching study with one run per damping scheme: hybrid, pure dynamic, pure
// regenerative, damping fixed at the regeneration optimum (stiffness still
// optimized), and the classic critically damped step response with nothing
// optimized. The equilibrium command is held at the target throughout.
// Settling thresholds come from the maxima over all five trajectories.
inline std::vector<SchemeResult> pendulum_comparison(const ToyOptions& opt = {}) {
  auto make_model = [&](DampingScheme scheme, double fixed_value) {
    IdealPendulumParams p;
    p.mass = opt.mass;
    p.length = opt.length;
    p.friction = opt.friction;
    p.max_stiffness = opt.max_stiffness;
    p.equilibrium_bounds = opt.equilibrium_bounds;
    p.damping = DampingConfig::from_limits(scheme, opt.max_damping, opt.alpha, opt.split_point, fixed_value);
    return PendulumModel{p};
  };

  const double regen_optimum_damping = (1.0 - opt.alpha) * opt.max_damping;  // the regenerative ceiling
  std::vector<SchemeResult> results;
  for (ToyScheme scheme : {ToyScheme::Hybrid, ToyScheme::Dynamic, ToyScheme::Regenerative,
                           ToyScheme::FixedRegenOptimum, ToyScheme::CriticallyDamped}) {
    PendulumModel model;
    OptimizationProblem<PendulumModel> prob;
    switch (scheme) {
      case ToyScheme::Hybrid: model = make_model(DampingScheme::Hybrid, 0.0); break;
      case ToyScheme::Dynamic: model = make_model(DampingScheme::Dynamic, 0.0); break;
      case ToyScheme::Regenerative: model = make_model(DampingScheme::Regenerative, 0.0); break;
      case ToyScheme::FixedRegenOptimum: model = make_model(DampingScheme::Fixed, regen_optimum_damping); break;
      case ToyScheme::CriticallyDamped: model = make_model(DampingScheme::Fixed, opt.critical_damping_value); break;
    }
    prob = OptimizationProblem<PendulumModel>(model, PendulumModel::State::Zero(), opt.weights);
    prob.control_dt = opt.control_dt;
    prob.substeps = opt.substeps;
    prob.frozen[0] = std::clamp(opt.weights.target, prob.bounds.lower[0], prob.bounds.upper[0]);
    if (scheme == ToyScheme::FixedRegenOptimum) prob.frozen[2] = opt.split_point;
    if (scheme == ToyScheme::CriticallyDamped) {
      prob.frozen[1] = opt.critical_stiffness_cmd;
      prob.frozen[2] = std::clamp(opt.critical_damping_value / opt.max_damping, 0.0, 1.0);
    }

    SchemeResult res;
    res.scheme = scheme;
    res.optimized = !prob.free_channels().empty();
    res.solution = solve(prob, opt.solver);
    res.energy = energy_report(res.solution.trajectory);
    results.push_back(std::move(res));
  }

  double vmax = 0.0, amax = 0.0;
  for (const auto& r : results) {
    const auto& traj = r.solution.trajectory;
    for (std::size_t i = 0; i < traj.samples(); ++i) vmax = std::max(vmax, std::abs(traj.qdot(i)));
    for (double a : sampled_accelerations(traj)) amax = std::max(amax, std::abs(a));
  }
  const double eps_vel = 0.01 * vmax;
  const double eps_acc = 0.015 * amax;
  for (auto& r : results) {
    r.settle_time = settling_time(r.solution.trajectory, eps_vel, eps_acc);
    r.overshoot_value = overshoot(r.solution.trajectory, opt.weights.target, r.settle_time);
  }
  return results;
}

}  // namespace via
