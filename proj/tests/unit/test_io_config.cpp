#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "via/config.hpp"
#include "via/io.hpp"

using Catch::Approx;
using namespace via;

namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path temp_dir() {
  const auto dir = fs::temp_directory_path() / "via_io_tests";
  fs::create_directories(dir);
  return dir;
}

PendulumModel toy_model() {
  IdealPendulumParams p;
  p.damping = DampingConfig::from_limits(DampingScheme::Hybrid, 50.0, 0.5);
  return PendulumModel{p};
}

MaccepaModel hardware_model() {
  MaccepaParams p;
  const MotorParams motor{40.0, 0.0212, 21.2};
  p.damping = DampingConfig::from_motor(DampingScheme::Hybrid, motor, StorageParams::from(motor, 25.3));
  return MaccepaModel{p};
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

}  // namespace

TEST_CASE("pendulum trajectory csv has the mandated header and empty servo columns") {
  const std::vector<ControlInput> controls(2, ControlInput{0.5, 0.5, 0.5});
  const auto traj = rollout(toy_model(), PendulumModel::State::Zero(), controls, 0.02, 2);
  const auto lines = split_lines(trajectory_csv(traj));
  REQUIRE(lines.size() == traj.samples() + 1);
  CHECK(lines[0] == "t,q,qdot,theta1,theta2,u1,u2,u3,d,P_rege");
  // columns 4 and 5 (theta1, theta2) stay empty
  const auto row = split_lines(lines[2]);
  std::vector<std::string> cells;
  std::string cur;
  for (char c : lines[2] + ",") {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else
      cur += c;
  }
  REQUIRE(cells.size() == 10);
  CHECK(cells[3].empty());
  CHECK(cells[4].empty());
  CHECK_FALSE(cells[5].empty());
}

TEST_CASE("maccepa trajectory csv fills the servo columns") {
  const std::vector<ControlInput> controls(2, ControlInput{0.3, kPi / 6.0, 0.5});
  auto x0 = MaccepaModel::State::Zero().eval();
  x0[3] = kPi / 6.0;
  const auto traj = rollout(hardware_model(), x0, controls, 0.02, 2);
  const auto lines = split_lines(trajectory_csv(traj));
  std::vector<std::string> cells;
  std::string cur;
  for (char c : lines[1] + ",") {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else
      cur += c;
  }
  REQUIRE(cells.size() == 10);
  CHECK_FALSE(cells[3].empty());
  CHECK(cells[4] == format_double(kPi / 6.0));
}

TEST_CASE("csv output uses LF endings and plain decimal points") {
  const std::vector<ControlInput> controls(1, ControlInput{0.5, 0.5, 0.5});
  const auto traj = rollout(toy_model(), PendulumModel::State::Zero(), controls, 0.02, 2);
  const std::string csv = trajectory_csv(traj);
  CHECK(csv.find('\r') == std::string::npos);
  CHECK(csv.back() == '\n');
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(-3.0) == "-3");
  const double pi_like = 1.0471975511965976;
  CHECK(std::stod(format_double(pi_like)) == pi_like);  // round-trip exactness
}

TEST_CASE("characterization csv carries the mandated header") {
  const MotorParams motor{20.0, 0.0212, 21.2};
  const auto storage = StorageParams::from(motor, 25.3);
  const std::vector<double> grid{0.0, 0.5, 1.0};
  const auto rows = characterize_rig(motor, storage, grid, {10.0, 2, 0.0, 0, 0.5});
  const auto lines = split_lines(characterization_csv(rows));
  REQUIRE(lines.size() == rows.size() + 1);
  CHECK(lines[0] == "u,D_r,D_d,d_hat,p0_hat,omega,I1,I2,Ir");
  const auto aggs = aggregate_characterization(rows);
  REQUIRE(aggs.size() == 3);
  CHECK(aggs[1].repeats == 2);
  const auto summary_lines = split_lines(characterization_summary_csv(aggs));
  CHECK(summary_lines[0] == "u,d_hat_mean,d_hat_std,p0_hat_mean,p0_hat_std,repeats");
}

TEST_CASE("writes are idempotent") {
  const auto path = temp_dir() / "idempotent.csv";
  const std::string content = "a,b\n1,2\n";
  write_file(path, content);
  const auto first = read_file(path);
  write_file(path, content);
  const auto second = read_file(path);
  CHECK(first == content);
  CHECK(first == second);
}

TEST_CASE("shipped configs load, validate, and round-trip") {
  for (const char* name : {"rig.json", "toy_pendulum.json", "maccepa_vd.json"}) {
    const fs::path path = fs::path(VIA_CONFIG_DIR) / name;
    INFO(path.string());
    const RunConfig cfg = load_config(path);
    const Json emitted = config_json(cfg);
    const RunConfig reloaded = parse_config(emitted);
    const Json emitted_again = config_json(reloaded);
    CHECK(emitted.dump(2) == emitted_again.dump(2));
  }
}

TEST_CASE("shipped configs carry the published constants") {
  const RunConfig rig = load_config(fs::path(VIA_CONFIG_DIR) / "rig.json");
  REQUIRE(rig.characterize.has_value());
  CHECK(rig.characterize->motor.gear_ratio == 20.0);
  CHECK(rig.characterize->rig.repeats == 10);

  const RunConfig toy = load_config(fs::path(VIA_CONFIG_DIR) / "toy_pendulum.json");
  REQUIRE(toy.pendulum.has_value());
  CHECK(toy.pendulum->toy.max_stiffness == 200.0);
  CHECK(toy.pendulum->toy.weights.w1 == 1000.0);
  CHECK(toy.pendulum->toy.weights.target == Approx(kPi / 3.0));

  const RunConfig lt = load_config(fs::path(VIA_CONFIG_DIR) / "maccepa_vd.json");
  REQUIRE(lt.longterm.has_value());
  CHECK(lt.longterm->model.spring_constant == 394.0);
  CHECK(lt.longterm->cost.w3 == 500.0);
  CHECK(lt.longterm->benchmark.trials == 20);
  CHECK(lt.longterm->conditions.size() == 4);
  // damping limits derived from the motor constants
  CHECK(lt.longterm->model.damping.max_dynamic == Approx(40.0 * 40.0 * 0.0212 * 0.0212 / 21.2).epsilon(1e-12));
}

TEST_CASE("unknown config keys are rejected") {
  Json root{{"schema_version", 1}, {"output_dir", "out"}, {"surprise", 1}};
  CHECK_THROWS_AS(parse_config(root), std::invalid_argument);
  Json nested{{"schema_version", 1},
              {"characterize", {{"motor", {{"gear_ratio", 20.0}, {"shaft_color", "red"}}}}}};
  CHECK_THROWS_AS(parse_config(nested), std::invalid_argument);
}

TEST_CASE("invalid parameter values are rejected") {
  Json bad_mass{{"schema_version", 1}, {"pendulum", {{"mass", -1.0}}}};
  CHECK_THROWS_AS(parse_config(bad_mass), std::invalid_argument);
  Json bad_version{{"schema_version", 99}};
  CHECK_THROWS_AS(parse_config(bad_version), std::invalid_argument);
  CHECK_THROWS_AS(load_config(fs::path(VIA_CONFIG_DIR) / "missing.json"), std::runtime_error);
}

TEST_CASE("trial records serialize with schema version and aggregates") {
  TrialRecord rec;
  rec.condition = ReachCondition::VSVD;
  rec.seed = 77;
  rec.trial_index = 3;
  MovementRecord m;
  m.target = 0.5;
  m.settle_time = 0.8;
  rec.movements.push_back(m);
  const Json j = trial_json(rec);
  CHECK(j.at("schema_version") == kSchemaVersion);
  CHECK(j.at("condition") == "VSVD");
  CHECK(j.at("movements").size() == 1);
  CHECK(j.at("movements")[0].at("target") == 0.5);
}
