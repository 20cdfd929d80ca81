#include "ecfcc/error.hpp"
#include "ecfcc/io.hpp"
#include "ecfcc/scenario.hpp"

#include <doctest.h>

#include <fstream>

using namespace ecfcc;

namespace {

const char* const walk = R"(name: walk
system:
  A: [[1.0]]
  B: [[1.0]]
  G: [[1.0]]
  horizon: 3
  u_min: [-10]
  u_max: [10]
initial_state: [0.0]
reference: [3.0]
cost:
  Q: 1.0
  R: 0.01
constraints:
  time_varying:
    - state: 0
      upper: {intercept: 2.0}
risk_budget: 0.2
ecf:
  samples: 500
  grid_points: 300
disturbance:
  sampler:
    seed: 4
    dims:
      - {family: gaussian, mean: 0.0, variance: 1.0}
validation:
  rollouts: 20000
  seed: 3
)";

std::string
replace(std::string text, const std::string& from, const std::string& to)
{
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

std::string
config_error(const std::string& text)
{
  try {
    parse_scenario(text, "walk.cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path
temp_dir(const std::string& name)
{
  const auto dir = std::filesystem::temp_directory_path() / ("ecfcc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace

TEST_CASE("parse a scenario")
{
  const auto cfg = parse_scenario(walk, "walk.cfg");
  CHECK(cfg.name == "walk");
  CHECK(cfg.system.horizon == 3);
  CHECK(cfg.Q == Eigen::MatrixXd::Identity(4, 4));
  CHECK(cfg.R == 0.01 * Eigen::MatrixXd::Identity(3, 3));
  CHECK(cfg.x_ref == Eigen::VectorXd::Constant(4, 3.0));
  CHECK(cfg.constraints.size() == 3);
  CHECK(cfg.ecf.samples == 500);
  CHECK(cfg.ecf.pwa_error == 1e-3);
  CHECK(cfg.ecf.max_segments == 20);
  CHECK(cfg.disturbance.sampler->seed == 4);
  CHECK(cfg.validation_sampler().seed == 3);
  const auto j = cfg.to_json();
  CHECK(j["ecf"]["samples"] == 500);
}

TEST_CASE("defaults")
{
  const std::string minimal = replace(replace(walk, "ecf:\n  samples: 500\n  grid_points: 300\n", ""),
                                      "risk_budget: 0.2\n", "");
  const auto cfg = parse_scenario(minimal);
  CHECK(cfg.ecf.samples == 1000);
  CHECK(cfg.ecf.grid_points == 1000);
  CHECK(cfg.ecf.pwa_error == 1e-3);
  CHECK(cfg.ecf.max_segments == 20);
  CHECK(cfg.risk_budget == 0.2);
  CHECK_FALSE(cfg.ecf.margin);
}

TEST_CASE("time parameterisation of bounds")
{
  std::string text = replace(walk, "  horizon: 3\n", "  horizon: 3\n  dt: 0.5\n");
  text = replace(text, "upper: {intercept: 2.0}", "upper: {slope: 1.0, intercept: 2.0}");
  const auto seconds = parse_scenario(text);
  CHECK(seconds.constraints.rows[0].offset == doctest::Approx(2.5));
  const auto steps = parse_scenario(replace(text, "      upper:", "      time: step\n      upper:"));
  CHECK(steps.constraints.rows[0].offset == doctest::Approx(3.0));
}

TEST_CASE("errors carry file, line and column")
{
  const std::string msg = config_error(replace(walk, "horizon: 3", "horizon: three"));
  CHECK(msg.find("walk.cfg:6:") != std::string::npos);
  CHECK(msg.find("integer") != std::string::npos);

  const std::string missing = config_error(replace(walk, "initial_state: [0.0]\n", ""));
  CHECK(missing.find("initial_state") != std::string::npos);

  const std::string syntax = config_error(replace(walk, "u_max: [10]", "u_max: [10"));
  CHECK(syntax.find("walk.cfg:") != std::string::npos);

  const std::string family = config_error(replace(walk, "family: gaussian", "family: cauchy"));
  CHECK(family.find("cauchy") != std::string::npos);
  CHECK(family.find("walk.cfg:26:") != std::string::npos);

  CHECK(config_error(replace(walk, "reference: [3.0]", "reference: [3.0, 1.0]")).find("reference") !=
        std::string::npos);
  CHECK(config_error(replace(walk, "risk_budget: 0.2", "risk_budget: 1.2")).find("risk_budget") !=
        std::string::npos);
  CHECK(config_error(replace(walk, "A: [[1.0]]", "A: [[1.0, 2.0]]")).find("walk.cfg:3:") != std::string::npos);
}

TEST_CASE("matrices from CSV files next to the config")
{
  const auto dir = temp_dir("csv");
  {
    std::ofstream os(dir / "a.csv");
    os << "0.5\n";
  }
  {
    std::ofstream os(dir / "walk.cfg");
    os << replace(walk, "A: [[1.0]]", "A: a.csv");
  }
  const auto cfg = load_scenario(dir / "walk.cfg");
  CHECK(cfg.system.A(0, 0) == 0.5);
  CHECK(cfg.source == dir / "walk.cfg");
}

TEST_CASE("row subsets")
{
  CHECK(parse_row_subset("0,3,5-7") == std::vector<int>{ 0, 3, 5, 6, 7 });
  CHECK(parse_row_subset("2") == std::vector<int>{ 2 });
  CHECK_THROWS_AS(parse_row_subset("x"), ConfigError);
  CHECK_THROWS_AS(parse_row_subset("5-2"), ConfigError);
  CHECK_THROWS_AS(parse_row_subset(""), ConfigError);
}

TEST_CASE("pipeline on the random walk")
{
  const auto cfg = parse_scenario(walk);
  const auto res = run_pipeline(cfg);
  REQUIRE(res.solution.status == QpStatus::optimal);
  CHECK(res.tables.size() == 3);
  CHECK(res.pwas.size() == 3);
  CHECK(res.sample_count == 500);
  CHECK(res.solution.delta_bar.sum() <= 0.2 + 1e-8);
  REQUIRE(res.report.has_value());
  CHECK(res.report->satisfaction >= 0.8);
  CHECK(res.report->n_rollouts == 20000);

  std::vector<std::string> stages;
  for (const auto& t : res.timings)
    stages.push_back(t.stage);
  CHECK(stages == std::vector<std::string>{ "samples", "bandwidth", "cdf", "moments", "assemble", "solve", "validate" });

  // Same configuration, same numbers.
  const auto again = run_pipeline(cfg);
  CHECK(again.solution.u_bar == res.solution.u_bar);
  CHECK(again.report->satisfied == res.report->satisfied);

  PipelineOptions other;
  other.seed = 99;
  other.validate = false;
  const auto reseeded = run_pipeline(cfg, other);
  CHECK(reseeded.sampler_seed == 99);
  CHECK(reseeded.solution.u_bar != res.solution.u_bar);
  CHECK_FALSE(reseeded.report.has_value());
}

TEST_CASE("margin and row subsets")
{
  const auto cfg = parse_scenario(walk);
  PipelineOptions plain;
  plain.validate = false;
  PipelineOptions tightened = plain;
  tightened.margin = true;
  const auto a = run_pipeline(cfg, plain);
  const auto b = run_pipeline(cfg, tightened);
  REQUIRE(b.margin.has_value());
  CHECK(b.margin->eps_E == doctest::Approx(std::sqrt(std::log(40.0) / 1000.0)));
  REQUIRE(b.solution.status == QpStatus::optimal);
  CHECK(b.solution.objective >= a.solution.objective - 1e-9);

  PipelineOptions subset = plain;
  subset.rows = std::vector<int>{ 2 };
  const auto c = run_pipeline(cfg, subset);
  CHECK(c.row_ids == std::vector<int>{ 2 });
  CHECK(c.pwas.size() == 1);
  subset.rows = std::vector<int>{ 5 };
  CHECK_THROWS_AS(run_pipeline(cfg, subset), ConfigError);
}

TEST_CASE("disturbance-free scenario reduces to deterministic tracking")
{
  std::string text = replace(walk, "G: [[1.0]]", "G: [[0.0]]");
  text = replace(text, "upper: {intercept: 2.0}", "upper: {intercept: 1.0e9}");
  const auto cfg = parse_scenario(text);
  const auto res = run_pipeline(cfg);
  REQUIRE(res.solution.status == QpStatus::optimal);
  CHECK(res.solution.delta_bar.cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(res.warnings.size() == 3);

  // Unconstrained LQ: minimise |Abar x0 + Bbar u - r|_Q^2 + |u|_R^2.
  const auto& c = res.csys;
  const Eigen::MatrixXd H = c.Bbar.transpose() * cfg.Q * c.Bbar + cfg.R;
  const Eigen::VectorXd g = c.Bbar.transpose() * cfg.Q * (c.Abar * cfg.x0 - cfg.x_ref);
  const Eigen::VectorXd u = -H.ldlt().solve(g);
  CHECK((res.solution.u_bar - u).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(res.report->satisfaction == 1.0);
}

TEST_CASE("stage errors name the stage and row")
{
  const std::string text = replace(walk, "  grid_points: 300\n", "  grid_points: 300\n  bandwidth: {sigma: 0.0}\n");
  const auto cfg = parse_scenario(text);
  try {
    run_pipeline(cfg);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "invert");
    CHECK(e.row() == 0);
    CHECK(std::string(e.what()).find("invert") != std::string::npos);
  }
}

TEST_CASE("infeasible budget is diagnosed")
{
  const auto cfg = parse_scenario(replace(walk, "risk_budget: 0.2", "risk_budget: 0.0"));
  PipelineOptions o;
  o.validate = false;
  const auto res = run_pipeline(cfg, o);
  CHECK(res.solution.status == QpStatus::infeasible);
  CHECK(res.risk_floor_sum() > 0.0);
  CHECK(res.solution.diagnostic.find("risk floors") != std::string::npos);
  CHECK_FALSE(res.report.has_value());
}

TEST_CASE("artifacts")
{
  const auto cfg = parse_scenario(walk);
  PipelineOptions o;
  const auto res = run_pipeline(cfg, o);
  const auto dir = temp_dir("artifacts");
  write_artifacts(res, cfg, o, dir);
  for (const char* f : { "manifest.json", "solution.json", "program.txt", "mc_report.json", "trajectory_stats.csv",
                         "cdf_row_0.csv", "cdf_row_2.csv", "pwa_row_1.csv" })
    CHECK(std::filesystem::exists(dir / f));
  std::ifstream is(dir / "manifest.json");
  const auto m = nlohmann::json::parse(is);
  CHECK(m["seed"] == 4);
  CHECK(m["status"] == "optimal");
  CHECK(m["timings"].contains("cdf"));
  CHECK(m["scenario"]["risk_budget"] == 0.2);

  std::ifstream pwa(dir / "pwa_row_1.csv");
  const auto back = io::read_pwa(pwa);
  CHECK(back.size() == res.pwas[1].size());
}
