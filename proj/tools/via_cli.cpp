// Command-line driver for the three experiment pipelines: circuit
// characterization, the five-scheme pendulum reaching study, and the
// long-term stochastic consecutive-reaching benchmark.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "via/config.hpp"
#include "via/io.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;  // overrides config output_dir when set
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "configuration file (JSON)")->required();
  cmd->add_option("--out", args.out_dir, "output directory (overrides the config)");
  auto* seed = cmd->add_option("--seed", "override the experiment seed");
  seed->each([&args](const std::string& v) { args.seed = std::stoull(v); });
  auto* jobs = cmd->add_option("--jobs", "number of parallel trials");
  jobs->each([&args](const std::string& v) { args.jobs = std::stoi(v); });
}

fs::path resolve_out(const via::RunConfig& cfg, const CommonArgs& args) {
  return args.out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(args.out_dir);
}

int run_characterize(const CommonArgs& args) {
  via::RunConfig cfg = via::load_config(args.config_path);
  if (!cfg.characterize) throw std::runtime_error("config has no 'characterize' section");
  via::CharacterizeConfig c = *cfg.characterize;
  if (args.seed) c.rig.seed = *args.seed;
  const fs::path out = resolve_out(cfg, args);

  std::vector<double> grid(static_cast<std::size_t>(c.grid_points));
  for (int i = 0; i < c.grid_points; ++i) grid[static_cast<std::size_t>(i)] = static_cast<double>(i) / (c.grid_points - 1);
  const via::StorageParams storage = via::StorageParams::from(c.motor, c.load_resistance);
  const auto rows = via::characterize_rig(c.motor, storage, grid, c.rig);
  const auto aggregates = via::aggregate_characterization(rows);

  via::write_file(out / "characterization.csv", via::characterization_csv(rows));
  via::write_file(out / "characterization_summary.csv", via::characterization_summary_csv(aggregates));

  const auto peak = std::max_element(aggregates.begin(), aggregates.end(),
                                     [](const auto& a, const auto& b) { return a.regen_mean < b.regen_mean; });
  const auto dmax = std::max_element(aggregates.begin(), aggregates.end(),
                                     [](const auto& a, const auto& b) { return a.damping_mean < b.damping_mean; });
  via::write_json_file(out / "summary.json",
                       via::Json{{"schema_version", via::kSchemaVersion},
                                 {"rows", rows.size()},
                                 {"repeats", c.rig.repeats},
                                 {"regen_peak_u", peak->control},
                                 {"regen_peak_value", peak->regen_mean},
                                 {"max_damping_u", dmax->control},
                                 {"max_damping_value", dmax->damping_mean}});
  std::cout << "characterize: " << rows.size() << " rows -> " << out.string() << "\n";
  return 0;
}

int run_pendulum(const CommonArgs& args) {
  via::RunConfig cfg = via::load_config(args.config_path);
  if (!cfg.pendulum) throw std::runtime_error("config has no 'pendulum' section");
  const via::ToyOptions& toy = cfg.pendulum->toy;
  const fs::path out = resolve_out(cfg, args);

  const auto results = via::pendulum_comparison(toy);
  via::write_pendulum_outputs(out, results);

  bool any_failed = false;
  for (const auto& r : results)
    any_failed = any_failed || r.solution.status == via::SolveStatus::Diverged;
  std::cout << "pendulum: " << results.size() << " schemes -> " << out.string() << "\n";
  return any_failed ? 2 : 0;
}

int run_longterm(const CommonArgs& args) {
  via::RunConfig cfg = via::load_config(args.config_path);
  if (!cfg.longterm) throw std::runtime_error("config has no 'longterm' section");
  via::LongtermConfig l = *cfg.longterm;
  if (args.seed) l.benchmark.seed = *args.seed;
  if (args.jobs) l.benchmark.jobs = *args.jobs;
  const fs::path out = resolve_out(cfg, args);

  const via::MaccepaModel model{l.model};
  via::BenchmarkSink sink;
  if (l.write_trajectories) {
    sink = [&out](via::ReachCondition c, int trial, int movement, const via::Trajectory<via::MaccepaModel>& traj) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s_trial%02d_move%02d.csv", via::condition_name(c), trial, movement);
      via::write_file(out / "trajectories" / name, via::trajectory_csv(traj));
    };
  }
  const via::BenchmarkRun run = via::run_benchmark(model, l.cost, l.conditions, l.benchmark, sink);
  via::write_benchmark_outputs(out, run);

  int failed = 0;
  for (const auto& trial : run.trials) failed += trial.failed_movements;
  std::cout << "longterm: " << run.trials.size() << " trials, " << failed << " failed movements -> "
            << out.string() << "\n";
  return failed > 0 ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation, optimal control and benchmarking for variable impedance actuators with a "
               "hybrid dynamic-regenerative damping module"};
  app.require_subcommand(1);

  CommonArgs characterize_args, pendulum_args, longterm_args;
  auto* characterize = app.add_subcommand("characterize", "run the virtual circuit characterization rig");
  add_common(characterize, characterize_args);
  auto* pendulum = app.add_subcommand("pendulum", "run the five-scheme pendulum reaching study");
  add_common(pendulum, pendulum_args);
  auto* longterm = app.add_subcommand("longterm", "run the long-term stochastic reaching benchmark");
  add_common(longterm, longterm_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (characterize->parsed()) return run_characterize(characterize_args);
    if (pendulum->parsed()) return run_pendulum(pendulum_args);
    if (longterm->parsed()) return run_longterm(longterm_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
