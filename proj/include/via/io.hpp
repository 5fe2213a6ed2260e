#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "via/benchmark.hpp"
#include "via/rig.hpp"

namespace via {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// Shortest round-trip decimal form, locale independent.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Writes bytes exactly as given (binary mode, LF endings as produced).
inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// CSV

template <class Model>
std::string trajectory_csv(const Trajectory<Model>& traj) {
  std::string out = "t,q,qdot,theta1,theta2,u1,u2,u3,d,P_rege\n";
  for (std::size_t i = 0; i < traj.samples(); ++i) {
    const auto& x = traj.states[i];
    const ControlInput& u = traj.control_at(i);
    out += format_double(traj.time(i));
    out += ',';
    out += format_double(x[0]);
    out += ',';
    out += format_double(x[1]);
    out += ',';
    if constexpr (Model::state_dim >= 4) {
      out += format_double(x[2]);
      out += ',';
      out += format_double(x[3]);
    } else {
      out += ',';  // servo columns stay empty for models without them
    }
    out += ',';
    out += format_double(u.equilibrium);
    out += ',';
    out += format_double(u.stiffness);
    out += ',';
    out += format_double(u.damping);
    out += ',';
    out += format_double(traj.powers[i].damping_coeff);
    out += ',';
    out += format_double(traj.powers[i].regen);
    out += '\n';
  }
  return out;
}

inline std::string characterization_csv(std::span<const CharacterizationRow> rows) {
  std::string out = "u,D_r,D_d,d_hat,p0_hat,omega,I1,I2,Ir\n";
  for (const auto& r : rows) {
    out += format_double(r.control);
    out += ',';
    out += format_double(r.duty_regen);
    out += ',';
    out += format_double(r.duty_brake);
    out += ',';
    out += format_double(r.damping_estimate);
    out += ',';
    out += format_double(r.regen_estimate);
    out += ',';
    out += format_double(r.speed);
    out += ',';
    out += format_double(r.drive_current);
    out += ',';
    out += format_double(r.damper_current);
    out += ',';
    out += format_double(r.load_current);
    out += '\n';
  }
  return out;
}

// Per-control aggregates of a repeated characterization sweep.
struct CharacterizationAggregate {
  double control = 0.0;
  double damping_mean = 0.0, damping_std = 0.0;
  double regen_mean = 0.0, regen_std = 0.0;
  int repeats = 0;
};

inline std::vector<CharacterizationAggregate> aggregate_characterization(
    std::span<const CharacterizationRow> rows) {
  std::vector<CharacterizationAggregate> out;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const CharacterizationAggregate& a) { return a.control == r.control; });
    if (it == out.end()) {
      out.push_back({r.control, 0.0, 0.0, 0.0, 0.0, 0});
      it = std::prev(out.end());
    }
    it->damping_mean += r.damping_estimate;
    it->regen_mean += r.regen_estimate;
    ++it->repeats;
  }
  for (auto& a : out) {
    a.damping_mean /= a.repeats;
    a.regen_mean /= a.repeats;
  }
  for (const auto& r : rows) {
    auto& a = *std::find_if(out.begin(), out.end(),
                            [&](const CharacterizationAggregate& x) { return x.control == r.control; });
    a.damping_std += (r.damping_estimate - a.damping_mean) * (r.damping_estimate - a.damping_mean);
    a.regen_std += (r.regen_estimate - a.regen_mean) * (r.regen_estimate - a.regen_mean);
  }
  for (auto& a : out) {
    if (a.repeats > 1) {
      a.damping_std = std::sqrt(a.damping_std / (a.repeats - 1));
      a.regen_std = std::sqrt(a.regen_std / (a.repeats - 1));
    } else {
      a.damping_std = a.regen_std = 0.0;
    }
  }
  return out;
}

inline std::string characterization_summary_csv(std::span<const CharacterizationAggregate> aggs) {
  std::string out = "u,d_hat_mean,d_hat_std,p0_hat_mean,p0_hat_std,repeats\n";
  for (const auto& a : aggs) {
    out += format_double(a.control);
    out += ',';
    out += format_double(a.damping_mean);
    out += ',';
    out += format_double(a.damping_std);
    out += ',';
    out += format_double(a.regen_mean);
    out += ',';
    out += format_double(a.regen_std);
    out += ',';
    out += std::to_string(a.repeats);
    out += '\n';
  }
  return out;
}

inline std::string metrics_summary_csv(const MetricsTable& table, const RadarScores& scores) {
  std::string out =
      "condition,settling_mean,settling_std,overshoot_mean,overshoot_std,"
      "E_in_mean,E_in_std,E_rege_mean,E_rege_std,gamma_t,gamma_o,gamma_c,gamma_r\n";
  for (const auto& row : table.rows) {
    const RadarRow* s = scores.find(row.condition);
    out += condition_name(row.condition);
    out += ',';
    out += format_double(row.settle.mean);
    out += ',';
    out += format_double(row.settle.stddev);
    out += ',';
    out += format_double(row.overshoot.mean);
    out += ',';
    out += format_double(row.overshoot.stddev);
    out += ',';
    out += format_double(row.consumed.mean);
    out += ',';
    out += format_double(row.consumed.stddev);
    out += ',';
    out += format_double(row.regenerated.mean);
    out += ',';
    out += format_double(row.regenerated.stddev);
    out += ',';
    // score cells stay empty unless the full condition set was run
    if (s) {
      out += format_double(s->time_score);
      out += ',';
      out += format_double(s->overshoot_score);
      out += ',';
      out += format_double(s->consumption_score);
      out += ',';
      out += format_double(s->regeneration_score);
    } else {
      out += ",,,";
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(Json& j, const EnergyReport& r) {
  j = Json{{"E", r.work}, {"E_rege", r.regenerated}, {"E_net", r.net}, {"eta", r.ratio}, {"E_in", r.consumed}};
}

inline const char* solve_status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::RegularizationCap: return "regularization_cap";
    case SolveStatus::Diverged: return "diverged";
  }
  return "?";
}

template <class Model>
Json solution_json(const Solution<Model>& sol) {
  Json controls = Json::array();
  for (const auto& u : sol.controls) controls.push_back({u.equilibrium, u.stiffness, u.damping});
  return Json{{"schema_version", kSchemaVersion},
              {"controls", std::move(controls)},
              {"cost_history", sol.cost_history},
              {"final_cost", sol.final_cost},
              {"iterations", sol.iterations},
              {"converged", sol.converged},
              {"status", solve_status_name(sol.status)}};
}

inline Json trial_json(const TrialRecord& rec) {
  Json movements = Json::array();
  for (const auto& m : rec.movements) {
    movements.push_back(Json{{"target", m.target},
                             {"settling_time", m.settle_time},
                             {"overshoot", m.overshoot_value},
                             {"energy", m.energy},
                             {"E_in_surrogate", m.force_sq_integral},
                             {"solver_converged", m.solver_converged},
                             {"solver_iterations", m.solver_iterations},
                             {"solver_cost", m.solver_cost},
                             {"balance_residual", m.balance_residual},
                             {"failed", m.failed}});
  }
  return Json{{"schema_version", kSchemaVersion},
              {"condition", condition_name(rec.condition)},
              {"trial_index", rec.trial_index},
              {"seed", rec.seed},
              {"eps_velocity", rec.eps_velocity},
              {"eps_acceleration", rec.eps_acceleration},
              {"mean_settling_time", rec.mean_settle},
              {"mean_overshoot", rec.mean_overshoot},
              {"total_E_in", rec.total_consumed},
              {"total_servo_work", rec.total_servo_work},
              {"total_E_rege", rec.total_regenerated},
              {"max_balance_residual", rec.max_balance_residual},
              {"failed_movements", rec.failed_movements},
              {"movements", std::move(movements)}};
}

// ---------------------------------------------------------------------------
// Experiment output bundles (shared by the CLI and the acceptance suite)

inline std::string pendulum_summary_csv(std::span<const SchemeResult> results) {
  std::string out = "scheme,E,E_rege,E_net,eta,settling_time,overshoot,converged\n";
  for (const auto& r : results) {
    const bool solver_ok = !r.optimized || r.solution.converged;
    out += scheme_name(r.scheme);
    out += ',';
    out += format_double(r.energy.work) + ',' + format_double(r.energy.regenerated) + ',' +
           format_double(r.energy.net) + ',' + format_double(r.energy.ratio) + ',' +
           format_double(r.settle_time) + ',' + format_double(r.overshoot_value) + ',' +
           (solver_ok ? "1" : "0") + '\n';
  }
  return out;
}

inline void write_pendulum_outputs(const std::filesystem::path& out, std::span<const SchemeResult> results) {
  Json schemes = Json::array();
  for (const auto& r : results) {
    write_file(out / (std::string(scheme_name(r.scheme)) + "_trajectory.csv"),
               trajectory_csv(r.solution.trajectory));
    write_json_file(out / (std::string(scheme_name(r.scheme)) + "_solution.json"), solution_json(r.solution));
    schemes.push_back(Json{{"scheme", scheme_name(r.scheme)},
                           {"energy", r.energy},
                           {"settling_time", r.settle_time},
                           {"overshoot", r.overshoot_value},
                           {"optimized", r.optimized},
                           {"solver", solve_status_name(r.solution.status)},
                           {"iterations", r.solution.iterations},
                           {"final_cost", r.solution.final_cost}});
  }
  write_file(out / "energy_summary.csv", pendulum_summary_csv(results));
  write_json_file(out / "energy_summary.json",
                  Json{{"schema_version", kSchemaVersion}, {"schemes", std::move(schemes)}});
}

inline Json metrics_json(const MetricsTable& table, const RadarScores& scores);

inline void write_benchmark_outputs(const std::filesystem::path& out, const BenchmarkRun& run) {
  for (const auto& trial : run.trials) {
    char name[64];
    std::snprintf(name, sizeof(name), "trial_%s_%02d.json", condition_name(trial.condition), trial.trial_index);
    write_json_file(out / name, trial_json(trial));
  }
  write_file(out / "summary.csv", metrics_summary_csv(run.table, run.scores));
  write_json_file(out / "summary.json", metrics_json(run.table, run.scores));
}

inline Json metrics_json(const MetricsTable& table, const RadarScores& scores) {
  Json rows = Json::array();
  for (const auto& row : table.rows) {
    Json entry{{"condition", condition_name(row.condition)},
               {"settling_time", {{"mean", row.settle.mean}, {"std", row.settle.stddev}}},
               {"overshoot", {{"mean", row.overshoot.mean}, {"std", row.overshoot.stddev}}},
               {"E_in", {{"mean", row.consumed.mean}, {"std", row.consumed.stddev}}},
               {"E_rege", {{"mean", row.regenerated.mean}, {"std", row.regenerated.stddev}}},
               {"trials", row.trials},
               {"failed_movements", row.failed_movements},
               {"max_balance_residual", row.max_balance_residual}};
    if (const RadarRow* s = scores.find(row.condition))
      entry["scores"] = Json{{"gamma_t", s->time_score},
                             {"gamma_o", s->overshoot_score},
                             {"gamma_c", s->consumption_score},
                             {"gamma_r", s->regeneration_score}};
    rows.push_back(std::move(entry));
  }
  return Json{{"schema_version", kSchemaVersion}, {"conditions", std::move(rows)}};
}

}  // namespace via
