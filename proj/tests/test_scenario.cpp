#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "aasde/error.hpp"
#include "aasde/scenario.hpp"

using namespace aasde;
using nlohmann::json;
using doctest::Approx;

namespace {

json base_config() {
  return json::parse(R"({
    "schema_version": 1,
    "name": "unit",
    "equation": {
      "semigroup": {"repr": "scalar", "rate": 1.0},
      "drift": {"base": [{"kind": "sine", "amplitude": 1.0, "frequency": 1.0, "phase": 0.0}],
                "gain": 0.2, "phi": "saturating"},
      "diffusion": {"gain": 0.1, "phi": "saturating"},
      "constants": {"K": 1.0, "omega": 1.0, "L": 0.04, "L_prime": 0.01, "L_hat": 0.2}
    },
    "grid": {"t_min": 0.0, "t_max": 2.0, "step": 0.0625, "burn_in_span": 5.0},
    "mc": {"n_paths": 64, "master_seed": 3}
  })");
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("aasde_unit_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunOutcome run(const json& cfg, const std::filesystem::path& dir, Task task, unsigned workers = 1,
               bool force = false) {
  RunOptions opt;
  opt.out_dir = dir;
  opt.task = task;
  opt.workers = workers;
  opt.force = force;
  return run_scenario(parse_scenario(cfg), opt);
}

}  // namespace

TEST_CASE("valid config parses") {
  const auto sc = parse_scenario(base_config());
  CHECK(sc.name == "unit");
  CHECK(sc.equation.dim() == 1);
  CHECK(sc.equation.drift.gain == 0.2);
  CHECK(sc.equation.drift.phi == Saturation::tanh);
  CHECK(sc.equation.drift.declared_L == 0.04);
  CHECK(sc.equation.diffusion.declared_L == 0.01);
  CHECK(sc.n_paths == 64);
  CHECK_FALSE(sc.task.has_value());
}

TEST_CASE("unknown keys are hard errors") {
  auto a = base_config();
  a["nmae"] = "typo";
  CHECK_THROWS_AS(parse_scenario(a), ConfigError);
  auto b = base_config();
  b["grid"]["stepp"] = 0.1;
  CHECK_THROWS_AS(parse_scenario(b), ConfigError);
  auto c = base_config();
  c["equation"]["drift"]["base"][0]["freq"] = 2.0;
  CHECK_THROWS_AS(parse_scenario(c), ConfigError);
  auto d = base_config();
  d["equation"]["constants"]["Lhat"] = 0.2;
  CHECK_THROWS_AS(parse_scenario(d), ConfigError);
}

TEST_CASE("schema and consistency errors") {
  auto a = base_config();
  a["schema_version"] = 2;
  CHECK_THROWS_AS(parse_scenario(a), ConfigError);
  auto b = base_config();
  b.erase("schema_version");
  CHECK_THROWS_AS(parse_scenario(b), ConfigError);
  auto c = base_config();
  c["equation"]["drift"]["declared_L"] = 0.05;
  CHECK_THROWS_AS(parse_scenario(c), ConfigError);
  auto d = base_config();
  d["equation"]["constants"].erase("L");
  CHECK_THROWS_AS(parse_scenario(d), ConfigError);
  auto e = base_config();
  e["equation"]["semigroup"] = json::parse(R"({"repr": "diagonal", "spectrum": [1.0, 2.0]})");
  CHECK_THROWS_AS(parse_scenario(e), ConfigError);
  auto f = base_config();
  f["task"] = "simulation";
  CHECK_THROWS_AS(parse_scenario(f), ConfigError);
  auto g = base_config();
  g["grid"]["step"] = -1.0;
  CHECK_THROWS_AS(parse_scenario(g), ConfigError);
  auto h = base_config();
  h["equation"]["semigroup"] = json::parse(R"({"repr": "dense", "matrix": [[1.0, 0.0], [0.0, -1.0]]})");
  CHECK_THROWS_AS(parse_scenario(h), ConfigError);
}

TEST_CASE("signal forms") {
  auto cfg = base_config();
  cfg["equation"]["drift"]["base"] = json::parse(R"([{"kind": "sum", "terms": [
      {"kind": "constant", "value": 0.5},
      {"kind": "quasi_periodic", "terms": [{"amplitude": 1.0, "frequency": 1.0},
                                           {"amplitude": 0.5, "frequency": 1.4142135623730951}]},
      {"kind": "scaled", "factor": 0.1, "signal": {"kind": "levitan"}}]}])");
  const auto sc = parse_scenario(cfg);
  const auto& s = sc.equation.drift.base.components[0];
  CHECK(s(0.0) == Approx(0.5 + 0.1 * std::sin(0.25)));
  CHECK(s.frequencies().size() == 2);
}

TEST_CASE("check_conditions examples") {
  auto cfg = base_config();
  cfg["equation"]["drift"] = json::parse(R"({"gain": 0.3, "phi": "saturating"})");
  cfg["equation"]["diffusion"] = json::parse(R"({"gain": 0.3, "phi": "saturating"})");
  cfg["equation"]["constants"] = json::parse(R"({"K": 1, "omega": 1, "L": 0.1, "L_prime": 0.1, "L_hat": 0.1})");
  const auto r = check_conditions(parse_scenario(cfg));
  CHECK(r["eta"].get<double>() == Approx(0.3));
  CHECK(r["margin"].get<double>() == Approx(0.94));
  CHECK(r["contraction_ok"].get<bool>());
  CHECK(r["stability_ok"].get<bool>());

  cfg["equation"]["constants"] = json::parse(R"({"K": 1, "omega": 1, "L": 0.6, "L_prime": 0, "L_hat": 0.1})");
  cfg["equation"]["diffusion"] = json::parse(R"({"gain": 0.0})");
  const auto v = check_conditions(parse_scenario(cfg));
  CHECK(v["eta"].get<double>() == Approx(1.2));
  CHECK_FALSE(v["contraction_ok"].get<bool>());

  cfg["equation"]["semigroup"]["rate"] = 0.5;
  cfg["equation"]["constants"] = json::parse(R"({"K": 1, "omega": 0.5, "L": 0.01, "L_prime": 0, "L_hat": 0.5})");
  const auto m = check_conditions(parse_scenario(cfg));
  CHECK(m["margin"].get<double>() == Approx(-0.875));
  CHECK_FALSE(m["stability_ok"].get<bool>());
}

TEST_CASE("run: check_conditions writes its report") {
  const auto dir = fresh_dir("cc");
  const auto out = run(base_config(), dir, Task::check_conditions);
  CHECK(out.exit_code == kExitPass);
  CHECK(std::filesystem::exists(dir / "conditions.json"));
  const auto j = json::parse(slurp(dir / "conditions.json"));
  CHECK(j["schema_version"] == 1);
  CHECK(j["eta"].get<double>() == Approx(0.09));
}

TEST_CASE("run: eta >= 1 without force exits 1") {
  auto cfg = base_config();
  cfg["equation"]["drift"] = json::parse(R"({"gain": 0.7, "phi": "identity"})");
  cfg["equation"]["constants"] = json::parse(R"({"K": 1, "omega": 1, "L": 0.6, "L_prime": 0.01, "L_hat": 0.8})");
  const auto dir = fresh_dir("eta");
  const auto out = run(cfg, dir, Task::fixed_point);
  CHECK(out.exit_code == kExitHypothesisViolation);
  const auto d = json::parse(slurp(dir / "diagnostic.json"));
  CHECK(d["category"] == "hypothesis_violation");
  CHECK(d["exit_code"] == 1);
}

TEST_CASE("run: simulate with zero forcing from zero writes zeros") {
  auto cfg = base_config();
  cfg["equation"].erase("drift");
  cfg["equation"].erase("diffusion");
  cfg["equation"].erase("constants");
  cfg["output"] = json::parse(R"({"trajectory_paths": 4})");
  const auto dir = fresh_dir("zeros");
  const auto out = run(cfg, dir, Task::simulate);
  CHECK(out.exit_code == kExitPass);
  std::istringstream csv(slurp(dir / "trajectories.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "t,path_0_dim_0,path_1_dim_0,path_2_dim_0,path_3_dim_0");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    CHECK(line.substr(line.find(',')) == ",0,0,0,0");
  }
  CHECK(rows == 33);
  CHECK(slurp(dir / "moments.csv").rfind("t,mean_sq,std_err\n", 0) == 0);
}

TEST_CASE("run: failed audits exit 3") {
  auto cfg = base_config();
  cfg["equation"]["constants"]["L"] = 0.01;
  const auto dir = fresh_dir("audit");
  const auto out = run(cfg, dir, Task::simulate);
  CHECK(out.exit_code == kExitConfigError);
  CHECK(json::parse(slurp(dir / "diagnostic.json"))["category"] == "audit_failure");

  auto k = base_config();
  k["equation"]["semigroup"] = json::parse(R"({"repr": "dense", "matrix": [[-1.0, 4.0], [0.0, -1.0]]})");
  k["equation"]["drift"] = json::parse(R"({"base": [0, 0]})");
  k["equation"]["diffusion"] = json::parse(R"({"base": [0.1, 0.1]})");
  k["equation"]["constants"] = json::parse(R"({"K": 1.0, "omega": 0.9})");
  CHECK(run(k, fresh_dir("audit_k"), Task::check_conditions).exit_code == kExitConfigError);
  k["equation"]["constants"].erase("K");
  k["equation"]["constants"].erase("omega");
  CHECK(run(k, fresh_dir("audit_k2"), Task::check_conditions).exit_code == kExitPass);
}

TEST_CASE("run: fixed point and stability") {
  auto cfg = base_config();
  const auto dir = fresh_dir("fp");
  const auto out = run(cfg, dir, Task::fixed_point);
  CHECK(out.exit_code == kExitPass);
  const auto rep = json::parse(slurp(dir / "report.json"));
  CHECK(rep["converged"].get<bool>());
  CHECK(rep["eta"].get<double>() == Approx(0.09));

  cfg["initial"] = json::parse(R"({"x0": 2.0, "y0": [0.0]})");
  const auto sdir = fresh_dir("stab");
  CHECK(run(cfg, sdir, Task::stability).exit_code == kExitPass);
  CHECK(slurp(sdir / "stability.csv").rfind("t,Y_hat,std_err,envelope\n", 0) == 0);

  cfg["equation"]["semigroup"]["rate"] = 0.5;
  cfg["equation"]["constants"]["omega"] = 0.5;
  cfg["equation"]["constants"]["L_hat"] = 0.5;
  CHECK(run(cfg, fresh_dir("stab_bad"), Task::stability).exit_code == kExitHypothesisViolation);
}

TEST_CASE("run: aa_test exit codes") {
  auto cfg = base_config();
  cfg["aa"] = json::parse(R"({"process": "signal", "depth": 7,
      "signal": {"kind": "quasi_periodic", "terms": [{"frequency": 1.0}, {"frequency": 1.4142135623730951}]}})");
  const auto dir = fresh_dir("aa");
  CHECK(run(cfg, dir, Task::aa_test).exit_code == kExitPass);
  CHECK(slurp(dir / "aa_errors.csv").rfind("shift,forward_err,backward_err,defect\n", 0) == 0);

  cfg["aa"]["signal"] = json::parse(R"({"kind": "linear_growth", "slope": 1.0})");
  cfg["aa"]["frequencies"] = {1.0};
  CHECK(run(cfg, fresh_dir("aa_growth"), Task::aa_test).exit_code == kExitHypothesisViolation);
}

TEST_CASE("run: artifacts do not depend on the worker count") {
  const auto d1 = fresh_dir("w1"), d4 = fresh_dir("w4");
  auto cfg = base_config();
  cfg["output"] = json::parse(R"({"plot": true})");
  run(cfg, d1, Task::fixed_point, 1);
  run(cfg, d4, Task::fixed_point, 4);
  for (const char* f : {"report.json", "moments.csv", "trajectories.csv", "plot.gp"}) {
    CHECK(slurp(d1 / f) == slurp(d4 / f));
  }
}
