#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "via/benchmark.hpp"
#include "via/io.hpp"
#include "via/rig.hpp"

namespace via {

struct CharacterizeConfig {
  MotorParams motor{20.0, 0.0212, 21.2};
  double load_resistance = 25.3;
  RigOptions rig{10.0, 10, 0.03, 12345, 0.5};
  int grid_points = 11;  // u swept uniformly over [0, 1]
};

struct PendulumConfig {
  ToyOptions toy;
};

struct LongtermConfig {
  MaccepaParams model;  // damping is assembled from the fields below
  MotorParams damping_motor{40.0, 0.0212, 21.2};
  double load_resistance = 25.3;
  double split_point = 0.5;
  CostWeights cost = CostWeights::maccepa_reaching(0.0);
  BenchmarkOptions benchmark;
  std::vector<ReachCondition> conditions{ReachCondition::FSFD, ReachCondition::FSVD, ReachCondition::VSFD,
                                         ReachCondition::VSVD};
  bool write_trajectories = true;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::string output_dir = "out";
  std::optional<CharacterizeConfig> characterize;
  std::optional<PendulumConfig> pendulum;
  std::optional<LongtermConfig> longterm;
};

namespace detail {

inline void check_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& context) {
  if (!obj.is_object()) throw std::invalid_argument("config: " + context + " must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known) throw std::invalid_argument("config: unknown key '" + item.key() + "' in " + context);
  }
}

template <class T>
void read_into(const Json& obj, const char* key, T& value) {
  if (obj.contains(key)) value = obj.at(key).get<T>();
}

inline MotorParams parse_motor(const Json& j, const std::string& context) {
  check_keys(j, {"gear_ratio", "torque_constant", "winding_resistance"}, context);
  MotorParams m;
  read_into(j, "gear_ratio", m.gear_ratio);
  read_into(j, "torque_constant", m.torque_constant);
  read_into(j, "winding_resistance", m.winding_resistance);
  return m;
}

inline void parse_solver(const Json& j, SolveOptions& s, const std::string& context) {
  check_keys(j, {"max_iterations", "tolerance", "jac_step", "max_line_search"}, context);
  read_into(j, "max_iterations", s.max_iterations);
  read_into(j, "tolerance", s.tolerance);
  read_into(j, "jac_step", s.jac_step);
  read_into(j, "max_line_search", s.max_line_search);
}

inline Json solver_json(const SolveOptions& s) {
  return Json{{"max_iterations", s.max_iterations},
              {"tolerance", s.tolerance},
              {"jac_step", s.jac_step},
              {"max_line_search", s.max_line_search}};
}

inline void parse_cost(const Json& j, CostWeights& w, bool with_target, const std::string& context) {
  check_keys(j, {"w1", "w2", "w3", "w4", "target", "horizon"}, context);
  read_into(j, "w1", w.w1);
  read_into(j, "w2", w.w2);
  read_into(j, "w3", w.w3);
  read_into(j, "w4", w.w4);
  if (with_target) read_into(j, "target", w.target);
  read_into(j, "horizon", w.horizon);
}

}  // namespace detail

inline RunConfig parse_config(const Json& root) {
  detail::check_keys(root, {"schema_version", "output_dir", "characterize", "pendulum", "longterm"}, "root");
  RunConfig cfg;
  detail::read_into(root, "schema_version", cfg.schema_version);
  if (cfg.schema_version != kSchemaVersion)
    throw std::invalid_argument("config: unsupported schema_version " + std::to_string(cfg.schema_version));
  detail::read_into(root, "output_dir", cfg.output_dir);

  if (root.contains("characterize")) {
    const Json& j = root.at("characterize");
    detail::check_keys(j, {"motor", "storage", "rig"}, "characterize");
    CharacterizeConfig c;
    if (j.contains("motor")) c.motor = detail::parse_motor(j.at("motor"), "characterize.motor");
    if (j.contains("storage")) {
      detail::check_keys(j.at("storage"), {"load_resistance"}, "characterize.storage");
      detail::read_into(j.at("storage"), "load_resistance", c.load_resistance);
    }
    if (j.contains("rig")) {
      const Json& r = j.at("rig");
      detail::check_keys(r, {"supply_voltage", "repeats", "noise_rel_std", "seed", "split_point", "grid_points"},
                         "characterize.rig");
      detail::read_into(r, "supply_voltage", c.rig.supply_voltage);
      detail::read_into(r, "repeats", c.rig.repeats);
      detail::read_into(r, "noise_rel_std", c.rig.noise_rel_std);
      detail::read_into(r, "seed", c.rig.seed);
      detail::read_into(r, "split_point", c.rig.split_point);
      detail::read_into(r, "grid_points", c.grid_points);
    }
    c.motor.validate();
    StorageParams::from(c.motor, c.load_resistance);  // validates
    if (c.grid_points < 2) throw std::invalid_argument("config: characterize.rig.grid_points must be >= 2");
    cfg.characterize = c;
  }

  if (root.contains("pendulum")) {
    const Json& j = root.at("pendulum");
    detail::check_keys(j,
                       {"mass", "length", "friction", "max_stiffness", "equilibrium_min", "equilibrium_max",
                        "max_damping", "alpha", "split_point", "critical_stiffness_cmd", "critical_damping_value",
                        "cost", "control_dt", "substeps", "solver"},
                       "pendulum");
    PendulumConfig p;
    ToyOptions& t = p.toy;
    detail::read_into(j, "mass", t.mass);
    detail::read_into(j, "length", t.length);
    detail::read_into(j, "friction", t.friction);
    detail::read_into(j, "max_stiffness", t.max_stiffness);
    detail::read_into(j, "equilibrium_min", t.equilibrium_bounds[0]);
    detail::read_into(j, "equilibrium_max", t.equilibrium_bounds[1]);
    detail::read_into(j, "max_damping", t.max_damping);
    detail::read_into(j, "alpha", t.alpha);
    detail::read_into(j, "split_point", t.split_point);
    detail::read_into(j, "critical_stiffness_cmd", t.critical_stiffness_cmd);
    detail::read_into(j, "critical_damping_value", t.critical_damping_value);
    if (j.contains("cost")) detail::parse_cost(j.at("cost"), t.weights, true, "pendulum.cost");
    detail::read_into(j, "control_dt", t.control_dt);
    detail::read_into(j, "substeps", t.substeps);
    if (j.contains("solver")) detail::parse_solver(j.at("solver"), t.solver, "pendulum.solver");
    t.weights.validate();
    // validate via a throwaway model configuration
    IdealPendulumParams probe;
    probe.mass = t.mass;
    probe.length = t.length;
    probe.friction = t.friction;
    probe.max_stiffness = t.max_stiffness;
    probe.equilibrium_bounds = t.equilibrium_bounds;
    probe.damping = DampingConfig::from_limits(DampingScheme::Hybrid, t.max_damping, t.alpha, t.split_point);
    probe.validate();
    cfg.pendulum = p;
  }

  if (root.contains("longterm")) {
    const Json& j = root.at("longterm");
    detail::check_keys(j, {"model", "damping", "cost", "benchmark", "control_dt", "substeps", "solver"}, "longterm");
    LongtermConfig l;
    if (j.contains("model")) {
      const Json& m = j.at("model");
      detail::check_keys(m,
                         {"lever_arm", "anchor_distance", "drum_radius", "spring_constant", "link_inertia",
                          "joint_friction", "servo_bandwidth", "external_torque", "equilibrium_min",
                          "equilibrium_max", "pretension_min", "pretension_max"},
                         "longterm.model");
      detail::read_into(m, "lever_arm", l.model.lever_arm);
      detail::read_into(m, "anchor_distance", l.model.anchor_distance);
      detail::read_into(m, "drum_radius", l.model.drum_radius);
      detail::read_into(m, "spring_constant", l.model.spring_constant);
      detail::read_into(m, "link_inertia", l.model.link_inertia);
      detail::read_into(m, "joint_friction", l.model.joint_friction);
      detail::read_into(m, "servo_bandwidth", l.model.servo_bandwidth);
      detail::read_into(m, "external_torque", l.model.external_torque);
      detail::read_into(m, "equilibrium_min", l.model.equilibrium_bounds[0]);
      detail::read_into(m, "equilibrium_max", l.model.equilibrium_bounds[1]);
      detail::read_into(m, "pretension_min", l.model.pretension_bounds[0]);
      detail::read_into(m, "pretension_max", l.model.pretension_bounds[1]);
    }
    if (j.contains("damping")) {
      const Json& d = j.at("damping");
      detail::check_keys(d, {"motor", "storage", "split_point"}, "longterm.damping");
      if (d.contains("motor")) l.damping_motor = detail::parse_motor(d.at("motor"), "longterm.damping.motor");
      if (d.contains("storage")) {
        detail::check_keys(d.at("storage"), {"load_resistance"}, "longterm.damping.storage");
        detail::read_into(d.at("storage"), "load_resistance", l.load_resistance);
      }
      detail::read_into(d, "split_point", l.split_point);
    }
    if (j.contains("cost")) detail::parse_cost(j.at("cost"), l.cost, false, "longterm.cost");
    if (j.contains("benchmark")) {
      const Json& b = j.at("benchmark");
      detail::check_keys(b,
                         {"seed", "targets_per_trial", "trials", "target_min", "target_max", "min_gap",
                          "fixed_pretension", "fixed_damping", "initial_pretension", "conditions",
                          "write_trajectories", "jobs"},
                         "longterm.benchmark");
      detail::read_into(b, "seed", l.benchmark.seed);
      detail::read_into(b, "targets_per_trial", l.benchmark.movements_per_trial);
      detail::read_into(b, "trials", l.benchmark.trials);
      detail::read_into(b, "target_min", l.benchmark.target_min);
      detail::read_into(b, "target_max", l.benchmark.target_max);
      detail::read_into(b, "min_gap", l.benchmark.min_gap);
      detail::read_into(b, "fixed_pretension", l.benchmark.fixed_pretension);
      detail::read_into(b, "fixed_damping", l.benchmark.fixed_damping);
      detail::read_into(b, "initial_pretension", l.benchmark.initial_pretension);
      detail::read_into(b, "jobs", l.benchmark.jobs);
      detail::read_into(b, "write_trajectories", l.write_trajectories);
      if (b.contains("conditions")) {
        l.conditions.clear();
        for (const auto& name : b.at("conditions")) l.conditions.push_back(condition_from_name(name.get<std::string>()));
      }
    }
    detail::read_into(j, "control_dt", l.benchmark.control_dt);
    detail::read_into(j, "substeps", l.benchmark.substeps);
    if (j.contains("solver")) detail::parse_solver(j.at("solver"), l.benchmark.solver, "longterm.solver");
    l.model.damping =
        DampingConfig::from_motor(DampingScheme::Hybrid, l.damping_motor, StorageParams::from(l.damping_motor, l.load_resistance), l.split_point);
    l.model.validate();
    l.cost.validate();
    if (l.benchmark.movements_per_trial < 1 || l.benchmark.trials < 1)
      throw std::invalid_argument("config: longterm.benchmark counts must be >= 1");
    if (l.conditions.empty()) throw std::invalid_argument("config: longterm.benchmark.conditions is empty");
    cfg.longterm = l;
  }

  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path.string());
  Json root;
  try {
    root = Json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config parse error in " + path.string() + ": " + e.what());
  }
  return parse_config(root);
}

inline Json config_json(const RunConfig& cfg) {
  Json root{{"schema_version", cfg.schema_version}, {"output_dir", cfg.output_dir}};
  if (cfg.characterize) {
    const auto& c = *cfg.characterize;
    root["characterize"] = Json{
        {"motor",
         {{"gear_ratio", c.motor.gear_ratio},
          {"torque_constant", c.motor.torque_constant},
          {"winding_resistance", c.motor.winding_resistance}}},
        {"storage", {{"load_resistance", c.load_resistance}}},
        {"rig",
         {{"supply_voltage", c.rig.supply_voltage},
          {"repeats", c.rig.repeats},
          {"noise_rel_std", c.rig.noise_rel_std},
          {"seed", c.rig.seed},
          {"split_point", c.rig.split_point},
          {"grid_points", c.grid_points}}}};
  }
  if (cfg.pendulum) {
    const auto& t = cfg.pendulum->toy;
    root["pendulum"] = Json{{"mass", t.mass},
                            {"length", t.length},
                            {"friction", t.friction},
                            {"max_stiffness", t.max_stiffness},
                            {"equilibrium_min", t.equilibrium_bounds[0]},
                            {"equilibrium_max", t.equilibrium_bounds[1]},
                            {"max_damping", t.max_damping},
                            {"alpha", t.alpha},
                            {"split_point", t.split_point},
                            {"critical_stiffness_cmd", t.critical_stiffness_cmd},
                            {"critical_damping_value", t.critical_damping_value},
                            {"cost",
                             {{"w1", t.weights.w1},
                              {"w2", t.weights.w2},
                              {"w3", t.weights.w3},
                              {"w4", t.weights.w4},
                              {"target", t.weights.target},
                              {"horizon", t.weights.horizon}}},
                            {"control_dt", t.control_dt},
                            {"substeps", t.substeps},
                            {"solver", detail::solver_json(t.solver)}};
  }
  if (cfg.longterm) {
    const auto& l = *cfg.longterm;
    Json conditions = Json::array();
    for (ReachCondition c : l.conditions) conditions.push_back(condition_name(c));
    root["longterm"] = Json{
        {"model",
         {{"lever_arm", l.model.lever_arm},
          {"anchor_distance", l.model.anchor_distance},
          {"drum_radius", l.model.drum_radius},
          {"spring_constant", l.model.spring_constant},
          {"link_inertia", l.model.link_inertia},
          {"joint_friction", l.model.joint_friction},
          {"servo_bandwidth", l.model.servo_bandwidth},
          {"external_torque", l.model.external_torque},
          {"equilibrium_min", l.model.equilibrium_bounds[0]},
          {"equilibrium_max", l.model.equilibrium_bounds[1]},
          {"pretension_min", l.model.pretension_bounds[0]},
          {"pretension_max", l.model.pretension_bounds[1]}}},
        {"damping",
         {{"motor",
           {{"gear_ratio", l.damping_motor.gear_ratio},
            {"torque_constant", l.damping_motor.torque_constant},
            {"winding_resistance", l.damping_motor.winding_resistance}}},
          {"storage", {{"load_resistance", l.load_resistance}}},
          {"split_point", l.split_point}}},
        {"cost", {{"w1", l.cost.w1}, {"w2", l.cost.w2}, {"w3", l.cost.w3}, {"w4", l.cost.w4}, {"horizon", l.cost.horizon}}},
        {"benchmark",
         {{"seed", l.benchmark.seed},
          {"targets_per_trial", l.benchmark.movements_per_trial},
          {"trials", l.benchmark.trials},
          {"target_min", l.benchmark.target_min},
          {"target_max", l.benchmark.target_max},
          {"min_gap", l.benchmark.min_gap},
          {"fixed_pretension", l.benchmark.fixed_pretension},
          {"fixed_damping", l.benchmark.fixed_damping},
          {"initial_pretension", l.benchmark.initial_pretension},
          {"conditions", std::move(conditions)},
          {"write_trajectories", l.write_trajectories},
          {"jobs", l.benchmark.jobs}}},
        {"control_dt", l.benchmark.control_dt},
        {"substeps", l.benchmark.substeps},
        {"solver", detail::solver_json(l.benchmark.solver)}};
  }
  return root;
}

}  // namespace via
