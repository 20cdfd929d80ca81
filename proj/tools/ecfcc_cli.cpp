// Command-line front end: the full pipeline plus one subcommand per stage.

#include "ecfcc/error.hpp"
#include "ecfcc/io.hpp"
#include "ecfcc/scenario.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace ecfcc;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_error = 1;
constexpr int exit_infeasible = 2;

int
status_code(QpStatus s)
{
  switch (s) {
    case QpStatus::optimal:
      return exit_ok;
    case QpStatus::infeasible:
      return exit_infeasible;
    default:
      return exit_error;
  }
}

std::ofstream
open_out(const std::string& path)
{
  std::ofstream os(path);
  if (!os)
    throw Error("cannot write " + path);
  os.precision(17);
  return os;
}

/// Writes to `path`, or stdout when it is empty or "-".
template<class F>
void
emit(const std::string& path, F&& write)
{
  if (path.empty() || path == "-") {
    std::cout.precision(17);
    write(std::cout);
  } else {
    auto os = open_out(path);
    write(os);
  }
}

Eigen::VectorXd
column(const Eigen::MatrixXd& data, const std::string& source)
{
  if (data.cols() != 1)
    throw DimensionError(source + ": expected one sample per line, got " + std::to_string(data.cols()) +
                         " columns");
  return data.col(0);
}

double
silverman_variance(const Eigen::VectorXd& y)
{
  const double n = static_cast<double>(y.size());
  const double var = (y.array() - y.mean()).square().sum() / (n - 1.0);
  const double h = 1.06 * std::sqrt(var) * std::pow(n, -0.2);
  return h * h;
}

struct EstimateArgs
{
  std::string samples, config, out;
  std::optional<double> sigma2;
  int grid = 1000;
  double quad_tol = 1e-7;
  std::optional<std::uint64_t> seed;
};

int
run_estimate(const EstimateArgs& a)
{
  if (!a.config.empty()) {
    if (a.out.empty())
      throw ConfigError("estimate --config needs --out <dir>");
    const ScenarioConfig cfg = load_scenario(a.config);
    PipelineOptions opt;
    opt.seed = a.seed;
    const PipelineResult res = estimate_rows(cfg, opt);
    std::filesystem::create_directories(a.out);
    for (std::size_t i = 0; i < res.tables.size(); ++i) {
      auto os = open_out((std::filesystem::path(a.out) / ("cdf_row_" + std::to_string(res.row_ids[i]) + ".csv")).string());
      io::write_cdf_table(os, res.tables[i]);
    }
    for (const auto& w : res.warnings)
      std::cerr << "warning: " << w << "\n";
    return exit_ok;
  }
  if (a.samples.empty())
    throw ConfigError("estimate needs --samples <csv> or --config <file>");
  const Eigen::VectorXd y = column(io::read_csv(a.samples), a.samples);
  if (y.size() < 2)
    throw InsufficientDataError("estimate needs at least 2 samples");
  const double s2 = a.sigma2 ? *a.sigma2 : silverman_variance(y);
  InversionOptions inv;
  inv.grid_size = a.grid;
  inv.quad_tol = a.quad_tol;
  const CdfTable table = invert(make_scalar_ecf(y, s2), inv);
  emit(a.out, [&](std::ostream& os) { io::write_cdf_table(os, table); });
  return exit_ok;
}

struct ApproximateArgs
{
  std::string table, out;
  double eps = 1e-3;
  int max_segments = 20;
  double quad_tol = 1e-7;
};

int
run_approximate(const ApproximateArgs& a)
{
  std::ifstream is(a.table);
  if (!is)
    throw ConfigError("cannot open " + a.table);
  const CdfTable table = io::read_cdf_table(is, a.quad_tol, a.table);
  const PwaUnderApprox pwa = under_approximate(table, a.eps, a.max_segments);
  emit(a.out, [&](std::ostream& os) { io::write_pwa(os, pwa); });
  return exit_ok;
}

struct SolveArgs
{
  std::string config, out, rows;
  std::optional<std::uint64_t> seed;
  bool margin = false;
  bool no_validate = false;
  int threads = 0;
};

int
run_solve(const SolveArgs& a)
{
  const ScenarioConfig cfg = load_scenario(a.config);
  PipelineOptions opt;
  opt.seed = a.seed;
  opt.margin = a.margin;
  opt.validate = !a.no_validate;
  opt.threads = a.threads;
  if (!a.rows.empty())
    opt.rows = parse_row_subset(a.rows);
  const PipelineResult res = run_pipeline(cfg, opt);
  write_artifacts(res, cfg, opt, a.out);

  for (const auto& w : res.warnings)
    std::cerr << "warning: " << w << "\n";
  std::cout << "status: " << to_string(res.solution.status) << "\n";
  std::cout << "objective: " << res.solution.objective << "\n";
  if (res.report) {
    std::cout << "satisfaction: " << res.report->satisfaction << " [" << res.report->wilson_interval.first
              << ", " << res.report->wilson_interval.second << "] over " << res.report->n_rollouts
              << " rollouts\n";
  }
  std::cout << "pipeline seconds: " << res.pipeline_seconds() << "\n";
  if (!res.solution.diagnostic.empty())
    std::cerr << res.solution.diagnostic << "\n";
  return status_code(res.solution.status);
}

struct ValidateArgs
{
  std::string config, solution, out, stats;
  std::optional<int> rollouts;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

int
run_validate(const ValidateArgs& a)
{
  ScenarioConfig cfg = load_scenario(a.config);
  if (a.rollouts)
    cfg.validation.rollouts = *a.rollouts;
  if (a.seed)
    cfg.validation.seed = *a.seed;
  std::ifstream is(a.solution);
  if (!is)
    throw ConfigError("cannot open " + a.solution);
  nlohmann::json sol;
  try {
    sol = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(a.solution + ": " + e.what());
  }
  if (!sol.contains("u_bar"))
    throw ConfigError(a.solution + ": missing 'u_bar'");
  const Eigen::VectorXd u = io::vector_from_json(sol["u_bar"]);
  const ConcatenatedSystem csys = concatenate(cfg.system);
  if (u.size() != csys.input_dim())
    throw DimensionError(a.solution + ": u_bar has " + std::to_string(u.size()) + " entries, expected " +
                         std::to_string(csys.input_dim()));
  RolloutOptions ro;
  ro.n_rollouts = cfg.validation.rollouts;
  ro.threads = a.threads;
  const McReport rep =
    rollout(csys, cfg.x0, u, cfg.constraints, cfg.validation_sampler(), cfg.tracking(), ro);
  emit(a.out, [&](std::ostream& os) { os << io::to_json(rep).dump(2) << "\n"; });
  if (!a.stats.empty()) {
    auto os = open_out(a.stats);
    io::write_trajectory_stats(os, rep, u, cfg.system.m(), cfg.dt);
  }
  return exit_ok;
}

struct MomentsArgs
{
  std::string samples, out, mode = "per_step";
  int horizon = 1;
  int p = 0;
  std::optional<double> sigma;
  bool no_debias = false;
  std::uint64_t seed = 0;
};

int
run_moments(const MomentsArgs& a)
{
  const Eigen::MatrixXd data = io::read_csv(a.samples);
  DisturbanceSamples s;
  if (a.mode == "trajectory") {
    const int p = a.p > 0 ? a.p : static_cast<int>(data.cols()) / a.horizon;
    s = trajectory_samples_from_rows(data, p, a.horizon);
  } else {
    s = build_trajectory_samples(data, a.horizon, a.seed);
  }
  const SmoothingMatrix sm =
    a.sigma ? SmoothingMatrix::replicate(*a.sigma * Eigen::MatrixXd::Identity(s.p(), s.p()), a.horizon)
            : select_bandwidth(s.per_step, a.horizon);
  for (const auto& w : sm.warnings)
    std::cerr << "warning: " << w << "\n";
  const MomentEstimates m = moments(s, sm, MomentOptions{ !a.no_debias });
  emit(a.out, [&](std::ostream& os) { os << io::to_json(m).dump(2) << "\n"; });
  return exit_ok;
}

struct QpArgs
{
  std::string program, out;
  double tol = 1e-8;
  int max_iter = 100;
};

int
run_qp(const QpArgs& a)
{
  std::ifstream is(a.program);
  if (!is)
    throw ConfigError("cannot open " + a.program);
  const ChanceProgram prog = read_program(is);
  QpSettings s;
  s.tol = a.tol;
  s.max_iter = a.max_iter;
  QpResult r = solve_qp(prog.to_qp(), s);
  r.objective = prog.objective(r.z);
  emit(a.out, [&](std::ostream& os) { io::write_qp_result(os, r); });
  return status_code(r.status);
}

} // namespace

int
main(int argc, char** argv)
{
  CLI::App app{ "Chance-constrained open-loop control from disturbance samples" };
  app.require_subcommand(1);

  EstimateArgs est;
  auto* c_est = app.add_subcommand("estimate", "Samples to smoothed-ECF CDF tables");
  c_est->add_option("--samples", est.samples, "Scalar samples, one per line");
  c_est->add_option("--config", est.config, "Scenario file: writes cdf_row_<i>.csv for every row");
  c_est->add_option("--sigma2", est.sigma2, "Kernel variance (plug-in rule by default)");
  c_est->add_option("--grid", est.grid, "Grid points")->check(CLI::PositiveNumber);
  c_est->add_option("--quad-tol", est.quad_tol, "Quadrature tolerance")->check(CLI::PositiveNumber);
  c_est->add_option("--seed", est.seed, "Override the sampler seed");
  c_est->add_option("--out", est.out, "Output file (stdout by default) or directory with --config");

  ApproximateArgs apx;
  auto* c_apx = app.add_subcommand("approximate", "CDF table to piecewise-affine under-approximation");
  c_apx->add_option("--table", apx.table, "x,cdf table")->required();
  c_apx->add_option("--eps", apx.eps, "Approximation error bound");
  c_apx->add_option("--max-segments", apx.max_segments, "Chord budget")->check(CLI::PositiveNumber);
  c_apx->add_option("--quad-tol", apx.quad_tol, "Accuracy of the table values");
  c_apx->add_option("--out", apx.out, "Output file (stdout by default)");

  SolveArgs sol;
  auto* c_sol = app.add_subcommand("solve", "Run the full pipeline");
  c_sol->add_option("--config", sol.config, "Scenario file")->required();
  c_sol->add_option("--out", sol.out, "Artifact directory")->required();
  c_sol->add_option("--seed", sol.seed, "Override the sampler seed");
  c_sol->add_flag("--margin", sol.margin, "Tighten by the confidence margin");
  c_sol->add_option("--rows", sol.rows, "Constraint subset, e.g. 0,3,5-7");
  c_sol->add_flag("--no-validate", sol.no_validate, "Skip Monte Carlo validation");
  c_sol->add_option("--threads", sol.threads, "Worker threads (0 = all cores)");

  ValidateArgs val;
  auto* c_val = app.add_subcommand("validate", "Monte Carlo check of a solution");
  c_val->add_option("--config", val.config, "Scenario file")->required();
  c_val->add_option("--solution", val.solution, "solution.json")->required();
  c_val->add_option("--rollouts", val.rollouts, "Override the rollout count")->check(CLI::PositiveNumber);
  c_val->add_option("--seed", val.seed, "Override the validation seed");
  c_val->add_option("--out", val.out, "Report file (stdout by default)");
  c_val->add_option("--stats", val.stats, "Trajectory statistics CSV");
  c_val->add_option("--threads", val.threads, "Worker threads (0 = all cores)");

  MomentsArgs mom;
  auto* c_mom = app.add_subcommand("moments", "Mean and variance estimates from samples");
  c_mom->add_option("--samples", mom.samples, "Samples CSV")->required();
  c_mom->add_option("--horizon", mom.horizon, "Horizon N")->check(CLI::PositiveNumber);
  c_mom->add_option("--mode", mom.mode, "per_step or trajectory")->check(CLI::IsMember({ "per_step", "trajectory" }));
  c_mom->add_option("--p", mom.p, "Disturbance dimension in trajectory mode");
  c_mom->add_option("--sigma", mom.sigma, "Isotropic kernel variance (plug-in rule by default)");
  c_mom->add_flag("--no-debias", mom.no_debias, "Report the smoothed variance");
  c_mom->add_option("--seed", mom.seed, "Permutation seed for per-step pools");
  c_mom->add_option("--out", mom.out, "Output file (stdout by default)");

  QpArgs qp;
  auto* c_qp = app.add_subcommand("qp", "Solve an exported program");
  c_qp->add_option("--program", qp.program, "program.txt")->required();
  c_qp->add_option("--tol", qp.tol, "KKT tolerance");
  c_qp->add_option("--max-iter", qp.max_iter, "Iteration limit");
  c_qp->add_option("--out", qp.out, "Result file (stdout by default)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_error;
  }

  try {
    if (*c_est)
      return run_estimate(est);
    if (*c_apx)
      return run_approximate(apx);
    if (*c_sol)
      return run_solve(sol);
    if (*c_val)
      return run_validate(val);
    if (*c_mom)
      return run_moments(mom);
    if (*c_qp)
      return run_qp(qp);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_error;
  }
  return exit_error;
}
