#include "ecfcc/scenario.hpp"

#include "ecfcc/error.hpp"
#include "ecfcc/io.hpp"

#include <yaml-cpp/yaml.h>

#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace ecfcc {

namespace {

/// Reads typed values from YAML nodes and reports "source:line:col".
class Reader
{
public:
  Reader(std::string source, std::filesystem::path base_dir)
    : source_(std::move(source))
    , base_dir_(std::move(base_dir))
  {
  }

  [[noreturn]] void fail(const YAML::Node& node, const std::string& msg) const
  {
    std::ostringstream os;
    os << source_;
    if (node.IsDefined() && !node.Mark().is_null())
      os << ":" << node.Mark().line + 1 << ":" << node.Mark().column + 1;
    os << ": " << msg;
    throw ConfigError(os.str());
  }

  YAML::Node require(const YAML::Node& parent, const char* key) const
  {
    const YAML::Node node = parent[key];
    if (!node)
      fail(parent, std::string("missing required key '") + key + "'");
    return node;
  }

  double number(const YAML::Node& node) const
  {
    if (!node.IsScalar())
      fail(node, "expected a number");
    try {
      return node.as<double>();
    } catch (const YAML::Exception&) {
      fail(node, "expected a number, got '" + node.Scalar() + "'");
    }
  }

  double number(const YAML::Node& parent, const char* key, double fallback) const
  {
    const YAML::Node node = parent[key];
    return node ? number(node) : fallback;
  }

  long long integer(const YAML::Node& node) const
  {
    if (!node.IsScalar())
      fail(node, "expected an integer");
    try {
      return node.as<long long>();
    } catch (const YAML::Exception&) {
      fail(node, "expected an integer, got '" + node.Scalar() + "'");
    }
  }

  int integer(const YAML::Node& parent, const char* key, int fallback) const
  {
    const YAML::Node node = parent[key];
    return node ? static_cast<int>(integer(node)) : fallback;
  }

  bool boolean(const YAML::Node& parent, const char* key, bool fallback) const
  {
    const YAML::Node node = parent[key];
    if (!node)
      return fallback;
    try {
      return node.as<bool>();
    } catch (const YAML::Exception&) {
      fail(node, "expected true or false");
    }
  }

  std::string string(const YAML::Node& node) const
  {
    if (!node.IsScalar())
      fail(node, "expected a string");
    return node.Scalar();
  }

  std::filesystem::path path(const YAML::Node& node) const
  {
    std::filesystem::path p = string(node);
    return p.is_absolute() || base_dir_.empty() ? p : base_dir_ / p;
  }

  Eigen::VectorXd vector(const YAML::Node& node) const
  {
    if (node.IsScalar() && !looks_numeric(node)) {
      const Eigen::MatrixXd M = io::read_csv(path(node));
      return Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
    }
    if (node.IsScalar())
      return Eigen::VectorXd::Constant(1, number(node));
    if (!node.IsSequence())
      fail(node, "expected a list of numbers");
    Eigen::VectorXd v(node.size());
    for (std::size_t i = 0; i < node.size(); ++i)
      v(static_cast<Eigen::Index>(i)) = number(node[i]);
    return v;
  }

  /// A list of rows, a CSV path, or (when `identity_dim` > 0) a scalar
  /// multiple of the identity.
  Eigen::MatrixXd matrix(const YAML::Node& node, Eigen::Index identity_dim = 0) const
  {
    if (node.IsScalar() && looks_numeric(node)) {
      if (identity_dim <= 0)
        fail(node, "expected a matrix (list of rows) or a CSV path");
      return number(node) * Eigen::MatrixXd::Identity(identity_dim, identity_dim);
    }
    if (node.IsScalar())
      return io::read_csv(path(node));
    if (!node.IsSequence() || node.size() == 0)
      fail(node, "expected a non-empty list of rows");
    const std::size_t rows = node.size();
    const std::size_t cols = node[0].IsSequence() ? node[0].size() : 0;
    if (cols == 0)
      fail(node[0], "matrix rows must be non-empty lists");
    Eigen::MatrixXd M(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const YAML::Node row = node[r];
      if (!row.IsSequence() || row.size() != cols)
        fail(row, "matrix row " + std::to_string(r) + " must have " + std::to_string(cols) +
                    " entries");
      for (std::size_t c = 0; c < cols; ++c)
        M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(row[c]);
    }
    return M;
  }

  Distribution distribution(const YAML::Node& node) const
  {
    if (!node.IsMap())
      fail(node, "distribution must be a map with a 'family' key");
    const std::string family = string(require(node, "family"));
    Distribution d;
    if (family == "uniform") {
      d.params = UniformDist{ number(require(node, "lo")), number(require(node, "hi")) };
    } else if (family == "gamma") {
      d.params = GammaDist{ number(require(node, "k")), number(require(node, "theta")),
                            number(node, "scale", 1.0) };
    } else if (family == "weibull") {
      d.params = WeibullDist{ number(require(node, "k")), number(require(node, "theta")),
                              number(node, "scale", 1.0) };
    } else if (family == "gaussian") {
      d.params = GaussianDist{ number(node, "mean", 0.0), number(require(node, "variance")) };
    } else if (family == "mixture") {
      d = make_mixture(number(require(node, "weight")), distribution(require(node, "first")),
                       distribution(require(node, "second")));
    } else {
      fail(node["family"], "unsupported distribution family '" + family + "'");
    }
    try {
      d.validate();
    } catch (const ConfigError& e) {
      fail(node, e.what());
    }
    return d;
  }

  SamplerSpec sampler(const YAML::Node& node) const
  {
    SamplerSpec spec;
    spec.seed = static_cast<std::uint64_t>(integer(require(node, "seed")));
    const YAML::Node dims = require(node, "dims");
    if (!dims.IsSequence() || dims.size() == 0)
      fail(dims, "'dims' must be a non-empty list of distributions");
    for (const auto& d : dims)
      spec.dims.push_back(distribution(d));
    return spec;
  }

private:
  static bool looks_numeric(const YAML::Node& node)
  {
    try {
      (void)node.as<double>();
      return true;
    } catch (const YAML::Exception&) {
      return false;
    }
  }

  std::string source_;
  std::filesystem::path base_dir_;
};

YAML::Node
load_yaml(const std::string& text, const std::string& source)
{
  try {
    return YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    std::ostringstream os;
    os << source << ":" << e.mark.line + 1 << ":" << e.mark.column + 1 << ": " << e.msg;
    throw ConfigError(os.str());
  }
}

} // namespace

SamplerSpec
ScenarioConfig::validation_sampler() const
{
  SamplerSpec spec;
  if (validation.sampler)
    spec = *validation.sampler;
  else if (disturbance.sampler)
    spec = *disturbance.sampler;
  else
    throw ConfigError("validation needs a sampler: add validation.sampler when the "
                      "disturbance comes from a CSV file");
  spec.seed = validation.seed;
  return spec;
}

nlohmann::json
ScenarioConfig::to_json() const
{
  auto sampler_json = [](const SamplerSpec& s) {
    nlohmann::json dims = nlohmann::json::array();
    for (const auto& d : s.dims)
      dims.push_back(d.describe());
    return nlohmann::json{ { "seed", s.seed }, { "dims", dims } };
  };
  nlohmann::json j;
  j["name"] = name;
  j["source"] = source.string();
  j["system"] = { { "A", io::to_json(system.A) },
                  { "B", io::to_json(system.B) },
                  { "G", io::to_json(system.G) },
                  { "horizon", system.horizon },
                  { "dt", dt },
                  { "u_min", io::to_json(system.u_min) },
                  { "u_max", io::to_json(system.u_max) } };
  j["initial_state"] = io::to_json(x0);
  j["reference"] = io::to_json(x_ref);
  j["constraint_rows"] = constraints.size();
  j["risk_budget"] = risk_budget;
  j["ecf"] = { { "samples", ecf.samples },
               { "grid_points", ecf.grid_points },
               { "pwa_error", ecf.pwa_error },
               { "max_segments", ecf.max_segments },
               { "quad_tol", ecf.quad_tol },
               { "bandwidth", ecf.sigma ? "fixed" : "plug-in" },
               { "debias_smoothing", ecf.debias_smoothing },
               { "eps_D", ecf.eps_D },
               { "alpha", ecf.alpha },
               { "margin", ecf.margin } };
  if (ecf.sigma)
    j["ecf"]["sigma"] = io::to_json(*ecf.sigma);
  nlohmann::json dist;
  if (disturbance.sampler)
    dist["sampler"] = sampler_json(*disturbance.sampler);
  if (disturbance.csv) {
    dist["csv"] = disturbance.csv->string();
    dist["mode"] = disturbance.mode == DisturbanceSource::Mode::per_step ? "per_step" : "trajectory";
  }
  j["disturbance"] = dist;
  j["validation"] = { { "enabled", validation.enabled },
                      { "rollouts", validation.rollouts },
                      { "seed", validation.seed } };
  if (validation.sampler)
    j["validation"]["sampler"] = sampler_json(*validation.sampler);
  j["solver"] = { { "tol", solver.tol }, { "max_iter", solver.max_iter } };
  return j;
}

ScenarioConfig
parse_scenario(const std::string& text, const std::string& source_name, const std::filesystem::path& base_dir)
{
  const YAML::Node root = load_yaml(text, source_name);
  Reader rd(source_name, base_dir);
  if (!root.IsMap())
    rd.fail(root, "scenario must be a map");

  ScenarioConfig cfg;
  cfg.name = root["name"] ? rd.string(root["name"]) : std::string("scenario");

  const YAML::Node sys = rd.require(root, "system");
  cfg.system.A = rd.matrix(rd.require(sys, "A"));
  cfg.system.B = rd.matrix(rd.require(sys, "B"));
  cfg.system.G = sys["G"] ? rd.matrix(sys["G"], cfg.system.A.rows())
                          : Eigen::MatrixXd::Identity(cfg.system.A.rows(), cfg.system.A.rows());
  cfg.system.horizon = static_cast<int>(rd.integer(rd.require(sys, "horizon")));
  cfg.dt = rd.number(sys, "dt", 1.0);
  cfg.system.u_min = rd.vector(rd.require(sys, "u_min"));
  cfg.system.u_max = rd.vector(rd.require(sys, "u_max"));
  try {
    cfg.system.validate();
  } catch (const ConfigError& e) {
    rd.fail(sys, e.what());
  }
  const int n = cfg.system.n(), m = cfg.system.m(), N = cfg.system.horizon;
  const int nx = n * (N + 1);

  cfg.x0 = rd.vector(rd.require(root, "initial_state"));
  if (cfg.x0.size() != n)
    rd.fail(root["initial_state"], "initial_state must have " + std::to_string(n) + " entries");
  const YAML::Node ref = rd.require(root, "reference");
  const Eigen::VectorXd r = rd.vector(ref);
  if (r.size() == n)
    cfg.x_ref = r.replicate(N + 1, 1);
  else if (r.size() == nx)
    cfg.x_ref = r;
  else
    rd.fail(ref, "reference must have n = " + std::to_string(n) + " or n(N+1) = " +
                   std::to_string(nx) + " entries");

  const YAML::Node cost = rd.require(root, "cost");
  cfg.Q = rd.matrix(rd.require(cost, "Q"), nx);
  cfg.R = rd.matrix(rd.require(cost, "R"), m * N);
  if (cfg.Q.rows() != nx || cfg.Q.cols() != nx)
    rd.fail(cost["Q"], "Q must be " + std::to_string(nx) + " x " + std::to_string(nx));
  if (cfg.R.rows() != m * N || cfg.R.cols() != m * N)
    rd.fail(cost["R"], "R must be " + std::to_string(m * N) + " x " + std::to_string(m * N));

  const YAML::Node cons = rd.require(root, "constraints");
  if (const YAML::Node tv = cons["time_varying"]) {
    if (!tv.IsSequence())
      rd.fail(tv, "time_varying must be a list");
    for (const auto& item : tv) {
      StateBoundSpec spec;
      spec.coordinate = static_cast<int>(rd.integer(rd.require(item, "state")));
      // Bounds are affine in physical time k * dt unless `time: step`.
      spec.dt = cfg.dt;
      if (const YAML::Node t = item["time"]) {
        const std::string unit = rd.string(t);
        if (unit == "step")
          spec.dt = 1.0;
        else if (unit != "seconds")
          rd.fail(t, "time must be 'seconds' or 'step'");
      }
      auto bound = [&](const char* key) -> std::optional<AffineBound> {
        const YAML::Node b = item[key];
        if (!b)
          return std::nullopt;
        return AffineBound{ rd.number(b, "slope", 0.0), rd.number(rd.require(b, "intercept")) };
      };
      spec.lower = bound("lower");
      spec.upper = bound("upper");
      spec.include_initial = rd.boolean(item, "include_initial", false);
      if (const YAML::Node steps = item["steps"]) {
        const Eigen::VectorXd s = rd.vector(steps);
        if (s.size() != 2)
          rd.fail(steps, "steps must be [first, last]");
        spec.first_step = static_cast<int>(s(0));
        spec.last_step = static_cast<int>(s(1));
      }
      try {
        cfg.constraints.append(build_time_varying_halfspaces(spec, cfg.system));
      } catch (const ConfigError& e) {
        rd.fail(item, e.what());
      }
    }
  }
  if (const YAML::Node ex = cons["explicit"]) {
    const Eigen::MatrixXd P = rd.matrix(rd.require(ex, "P"));
    const Eigen::VectorXd q = rd.vector(rd.require(ex, "q"));
    if (P.cols() != nx)
      rd.fail(ex["P"], "P must have n(N+1) = " + std::to_string(nx) + " columns");
    if (q.size() != P.rows())
      rd.fail(ex["q"], "q must have one entry per row of P");
    for (Eigen::Index i = 0; i < P.rows(); ++i)
      cfg.constraints.rows.push_back({ P.row(i).transpose(), q(i) });
  }
  try {
    cfg.constraints.validate(nx);
  } catch (const ConfigError& e) {
    rd.fail(cons, e.what());
  }

  cfg.risk_budget = rd.number(root, "risk_budget", 0.2);
  if (!(cfg.risk_budget >= 0.0 && cfg.risk_budget <= 1.0))
    rd.fail(root["risk_budget"], "risk_budget must lie in [0, 1]");

  if (const YAML::Node e = root["ecf"]) {
    cfg.ecf.samples = rd.integer(e, "samples", cfg.ecf.samples);
    cfg.ecf.grid_points = rd.integer(e, "grid_points", cfg.ecf.grid_points);
    cfg.ecf.pwa_error = rd.number(e, "pwa_error", cfg.ecf.pwa_error);
    cfg.ecf.max_segments = rd.integer(e, "max_segments", cfg.ecf.max_segments);
    cfg.ecf.quad_tol = rd.number(e, "quad_tol", cfg.ecf.quad_tol);
    cfg.ecf.debias_smoothing = rd.boolean(e, "debias_smoothing", cfg.ecf.debias_smoothing);
    cfg.ecf.eps_D = rd.number(e, "eps_D", cfg.ecf.eps_D);
    cfg.ecf.alpha = rd.number(e, "alpha", cfg.ecf.alpha);
    cfg.ecf.margin = rd.boolean(e, "margin", cfg.ecf.margin);
    if (const YAML::Node bw = e["bandwidth"]) {
      if (bw.IsScalar() && bw.Scalar() == "plug-in") {
        // default rule
      } else if (bw.IsMap() && bw["sigma"]) {
        cfg.ecf.sigma = rd.matrix(bw["sigma"], cfg.system.p());
      } else {
        rd.fail(bw, "bandwidth must be 'plug-in' or {sigma: <matrix or scalar>}");
      }
    }
    if (cfg.ecf.samples < 2)
      rd.fail(e["samples"], "samples must be >= 2");
    if (cfg.ecf.grid_points < 2)
      rd.fail(e["grid_points"], "grid_points must be >= 2");
    if (cfg.ecf.max_segments < 1)
      rd.fail(e["max_segments"], "max_segments must be >= 1");
  }

  const YAML::Node dist = rd.require(root, "disturbance");
  if (const YAML::Node s = dist["sampler"])
    cfg.disturbance.sampler = rd.sampler(s);
  if (const YAML::Node c = dist["csv"]) {
    cfg.disturbance.csv = rd.path(c);
    const std::string mode = dist["mode"] ? rd.string(dist["mode"]) : "per_step";
    if (mode == "per_step")
      cfg.disturbance.mode = DisturbanceSource::Mode::per_step;
    else if (mode == "trajectory")
      cfg.disturbance.mode = DisturbanceSource::Mode::trajectory;
    else
      rd.fail(dist["mode"], "mode must be per_step or trajectory");
  }
  if (!cfg.disturbance.sampler && !cfg.disturbance.csv)
    rd.fail(dist, "disturbance needs a 'sampler' or a 'csv' source");
  if (cfg.disturbance.sampler && cfg.disturbance.sampler->dimension() != cfg.system.p())
    rd.fail(dist["sampler"], "sampler must have p = " + std::to_string(cfg.system.p()) + " dims");

  if (const YAML::Node v = root["validation"]) {
    cfg.validation.enabled = rd.boolean(v, "enabled", true);
    cfg.validation.rollouts = rd.integer(v, "rollouts", cfg.validation.rollouts);
    if (v["seed"])
      cfg.validation.seed = static_cast<std::uint64_t>(rd.integer(v["seed"]));
    if (const YAML::Node s = v["sampler"]) {
      cfg.validation.sampler = rd.sampler(s);
      if (cfg.validation.sampler->dimension() != cfg.system.p())
        rd.fail(s, "validation sampler must have p = " + std::to_string(cfg.system.p()) + " dims");
    }
    if (cfg.validation.rollouts < 1)
      rd.fail(v["rollouts"], "rollouts must be >= 1");
  }
  if (const YAML::Node s = root["solver"]) {
    cfg.solver.tol = rd.number(s, "tol", cfg.solver.tol);
    cfg.solver.max_iter = rd.integer(s, "max_iter", cfg.solver.max_iter);
  }
  return cfg;
}

ScenarioConfig
load_scenario(const std::filesystem::path& path)
{
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot open scenario " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  auto cfg = parse_scenario(buf.str(), path.string(), path.parent_path());
  cfg.source = path;
  return cfg;
}

SamplerSpec
parse_sampler(const std::string& yaml_text, const std::string& source_name)
{
  const YAML::Node root = load_yaml(yaml_text, source_name);
  Reader rd(source_name, {});
  return rd.sampler(root);
}

std::vector<int>
parse_row_subset(const std::string& text)
{
  std::vector<int> rows;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty())
      continue;
    try {
      const auto dash = item.find('-');
      if (dash == std::string::npos) {
        rows.push_back(std::stoi(item));
      } else {
        const int lo = std::stoi(item.substr(0, dash)), hi = std::stoi(item.substr(dash + 1));
        if (lo > hi)
          throw ConfigError("row range '" + item + "' is reversed");
        for (int r = lo; r <= hi; ++r)
          rows.push_back(r);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("malformed row subset '" + text + "'");
    }
  }
  if (rows.empty())
    throw ConfigError("empty row subset");
  return rows;
}

namespace {

using Clock = std::chrono::steady_clock;

int
thread_count(int requested, int work)
{
  int t = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, std::min(t, work));
}

/// Runs body(k) for k in [0, count) on a small pool; the first exception
/// (lowest k) is rethrown after all workers finish.
template<class Body>
void
parallel_for(int count, int threads, Body body)
{
  std::vector<std::exception_ptr> errors(count);
  std::atomic<int> next{ 0 };
  auto worker = [&] {
    for (int k = next++; k < count; k = next++) {
      try {
        body(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int t = thread_count(threads, count);
  if (t == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < t; ++i)
      pool.emplace_back(worker);
    for (auto& th : pool)
      th.join();
  }
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);
}

class StageClock
{
public:
  explicit StageClock(std::vector<StageTiming>& out)
    : out_(out)
  {
  }

  template<class F>
  auto run(const std::string& stage, F&& f)
  {
    const auto start = Clock::now();
    auto record = [&] {
      out_.push_back({ stage, std::chrono::duration<double>(Clock::now() - start).count() });
    };
    try {
      if constexpr (std::is_void_v<decltype(f())>) {
        f();
        record();
      } else {
        auto value = f();
        record();
        return value;
      }
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(stage, -1, e.what());
    }
  }

private:
  std::vector<StageTiming>& out_;
};

DisturbanceSamples
draw_samples(const ScenarioConfig& cfg, const PipelineOptions& opt, std::uint64_t& seed_used)
{
  const int N = cfg.system.horizon;
  if (cfg.disturbance.csv) {
    const Eigen::MatrixXd data = io::read_csv(*cfg.disturbance.csv);
    seed_used = opt.seed.value_or(0);
    if (cfg.disturbance.mode == DisturbanceSource::Mode::trajectory)
      return trajectory_samples_from_rows(data, cfg.system.p(), N);
    if (data.cols() != cfg.system.p())
      throw DimensionError("disturbance CSV " + cfg.disturbance.csv->string() + " has " +
                           std::to_string(data.cols()) + " columns, expected p = " +
                           std::to_string(cfg.system.p()));
    return build_trajectory_samples(data, N, seed_used);
  }
  SamplerSpec spec = *cfg.disturbance.sampler;
  if (opt.seed)
    spec.seed = *opt.seed;
  seed_used = spec.seed;
  return build_trajectory_samples(sample(spec, cfg.ecf.samples), N, spec.seed);
}

} // namespace

double
PipelineResult::pipeline_seconds() const
{
  double total = 0.0;
  for (const auto& t : timings)
    total += t.seconds;
  return total;
}

double
PipelineResult::risk_floor_sum() const
{
  double total = 0.0;
  for (const auto& pwa : pwas)
    total += std::max(0.0, 1.0 - pwa.cap());
  return total;
}

ChanceProgram
assemble_for_scenario(const ScenarioConfig& config,
                      const ConcatenatedSystem& csys,
                      const PolytopeConstraints& constraints,
                      const std::vector<PwaUnderApprox>& pwas,
                      const MomentEstimates& moments)
{
  AssemblyInput in;
  in.csys = &csys;
  in.x0 = config.x0;
  in.constraints = &constraints;
  in.pwas = &pwas;
  in.risk_budget = config.risk_budget;
  in.u_min = config.system.u_min;
  in.u_max = config.system.u_max;
  in.cost = expand_cost(csys, config.x0, config.x_ref, config.Q, config.R, moments);
  return assemble(in);
}

PipelineResult
estimate_rows(const ScenarioConfig& config, const PipelineOptions& options, DisturbanceSamples* samples_out)
{
  PipelineResult res;
  StageClock clock(res.timings);
  res.csys = concatenate(config.system);

  if (options.rows) {
    for (int r : *options.rows) {
      if (r < 0 || r >= config.constraints.size())
        throw ConfigError("row " + std::to_string(r) + " is out of range (the scenario has " +
                          std::to_string(config.constraints.size()) + " constraint rows)");
      res.constraints.rows.push_back(config.constraints.rows[r]);
      res.row_ids.push_back(r);
    }
  } else {
    res.constraints = config.constraints;
    for (int r = 0; r < config.constraints.size(); ++r)
      res.row_ids.push_back(r);
  }

  DisturbanceSamples samples =
    clock.run("samples", [&] { return draw_samples(config, options, res.sampler_seed); });
  res.sample_count = samples.count();

  res.smoothing = clock.run("bandwidth", [&] {
    return config.ecf.sigma ? SmoothingMatrix::replicate(*config.ecf.sigma, config.system.horizon)
                            : select_bandwidth(samples.per_step, config.system.horizon);
  });
  for (const auto& w : res.smoothing.warnings)
    res.warnings.push_back(w);

  const int l = res.constraints.size();
  res.tables.resize(l);
  res.pwas.resize(l);
  res.row_sigma2.resize(l);
  clock.run("cdf", [&] {
    InversionOptions inv;
    inv.grid_size = config.ecf.grid_points;
    inv.quad_tol = config.ecf.quad_tol;
    parallel_for(l, options.threads, [&](int i) {
      const int row = res.row_ids[i];
      const Eigen::VectorXd dir = res.csys.Gbar.transpose() * res.constraints.rows[i].normal;
      std::string stage = "project";
      if (dir.cwiseAbs().maxCoeff() == 0.0) {
        // No disturbance reaches this row: its CDF is a unit step at 0,
        // so the row becomes the hard constraint p^T xbar_nom <= q.
        CdfTable& t = res.tables[i];
        t.grid = Eigen::VectorXd::Zero(1);
        t.values = Eigen::VectorXd::Ones(1);
        t.quad_tol = config.ecf.quad_tol;
        PwaUnderApprox& pwa = res.pwas[i];
        pwa.segments = { { 0.0, 1.0 } };
        pwa.eps = config.ecf.pwa_error;
        res.row_sigma2[i] = 0.0;
        return;
      }
      try {
        const ProjectedEcf ecf = project(samples, res.smoothing, dir);
        res.row_sigma2[i] = ecf.sigma2;
        stage = "invert";
        res.tables[i] = invert(ecf, inv);
        stage = "approximate";
        res.pwas[i] = under_approximate(res.tables[i], config.ecf.pwa_error, config.ecf.max_segments);
      } catch (const Error& e) {
        throw StageError(stage, row, e.what());
      }
    });
  });
  for (int i = 0; i < l; ++i)
    if (res.tables[i].size() == 1)
      res.warnings.push_back("constraint row " + std::to_string(res.row_ids[i]) +
                             " is not affected by the disturbance; kept as a hard constraint");
  if (samples_out)
    *samples_out = std::move(samples);
  return res;
}

PipelineResult
run_pipeline(const ScenarioConfig& config, const PipelineOptions& options)
{
  DisturbanceSamples samples;
  PipelineResult res = estimate_rows(config, options, &samples);
  StageClock clock(res.timings);

  res.moments = clock.run("moments", [&] {
    return moments(samples, res.smoothing, MomentOptions{ config.ecf.debias_smoothing });
  });

  res.program = clock.run("assemble", [&] {
    ChanceProgram prog = assemble_for_scenario(config, res.csys, res.constraints, res.pwas, res.moments);
    if (options.margin || config.ecf.margin) {
      res.margin = dkw_margin(res.sample_count, config.ecf.alpha, config.ecf.eps_D, config.ecf.pwa_error);
      prog = apply_confidence_margin(prog, *res.margin);
    }
    return prog;
  });
  for (const auto& w : res.program.warnings)
    res.warnings.push_back(w);

  res.solution = clock.run("solve", [&] {
    return solve(res.program, config.solver, config.system.u_min, config.system.u_max);
  });
  if (res.solution.status == QpStatus::infeasible) {
    double floor = 0.0;
    for (const auto& info : res.program.rows)
      if (info.kind == RowKind::risk_floor)
        floor += std::max(0.0, 1.0 - info.cap);
    std::ostringstream os;
    os << "the per-constraint risk floors sum to " << floor << " against a risk budget of "
       << config.risk_budget;
    if (floor > config.risk_budget)
      os << "; the budget cannot be met even with every constraint at its CDF cap";
    if (!res.solution.diagnostic.empty())
      os << "; " << res.solution.diagnostic;
    res.solution.diagnostic = os.str();
  }

  if (options.validate && config.validation.enabled && res.solution.status == QpStatus::optimal) {
    res.report = clock.run("validate", [&] {
      RolloutOptions ro;
      ro.n_rollouts = config.validation.rollouts;
      ro.threads = options.threads;
      return rollout(res.csys, config.x0, res.solution.u_bar, res.constraints,
                     config.validation_sampler(), config.tracking(), ro);
    });
  }
  return res;
}

void
write_artifacts(const PipelineResult& result,
                const ScenarioConfig& config,
                const PipelineOptions& options,
                const std::filesystem::path& out_dir)
{
  std::filesystem::create_directories(out_dir);
  auto open = [&](const std::string& name) {
    std::ofstream os(out_dir / name);
    if (!os)
      throw Error("cannot write " + (out_dir / name).string());
    os.precision(17);
    return os;
  };

  for (std::size_t i = 0; i < result.tables.size(); ++i) {
    const std::string id = std::to_string(result.row_ids[i]);
    auto cdf = open("cdf_row_" + id + ".csv");
    io::write_cdf_table(cdf, result.tables[i]);
    auto pwa = open("pwa_row_" + id + ".csv");
    io::write_pwa(pwa, result.pwas[i]);
  }
  {
    auto os = open("program.txt");
    write_program(os, result.program);
  }
  nlohmann::json sol = io::to_json(result.solution);
  sol["risk_floor_sum"] = result.risk_floor_sum();
  {
    auto os = open("solution.json");
    os << sol.dump(2) << "\n";
  }
  if (result.report) {
    auto os = open("mc_report.json");
    os << io::to_json(*result.report).dump(2) << "\n";
    auto ts = open("trajectory_stats.csv");
    io::write_trajectory_stats(ts, *result.report, result.solution.u_bar, config.system.m(), config.dt);
  }

  nlohmann::json m;
  m["scenario"] = config.to_json();
  m["seed"] = result.sampler_seed;
  m["sample_count"] = result.sample_count;
  m["rows"] = result.row_ids;
  m["margin_requested"] = options.margin || config.ecf.margin;
  if (result.margin)
    m["margin"] = { { "alpha", result.margin->alpha },
                    { "eps_E", result.margin->eps_E },
                    { "eps_D", result.margin->eps_D },
                    { "eps", result.margin->eps },
                    { "total", result.margin->total() } };
  m["smoothing"] = io::to_json(result.smoothing.sigma);
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < result.tables.size(); ++i) {
    const auto& t = result.tables[i];
    const auto& p = result.pwas[i];
    rows.push_back({ { "row", result.row_ids[i] },
                     { "sigma2", result.row_sigma2[i] },
                     { "x_min", t.x_min },
                     { "x_max", t.x_max },
                     { "truncation", t.truncation },
                     { "quadrature_error", t.error_estimate },
                     { "segments", p.size() },
                     { "x_lb", p.x_lb },
                     { "cap", p.cap() } });
  }
  m["rows_detail"] = rows;
  m["moments"] = io::to_json(result.moments);
  m["status"] = to_string(result.solution.status);
  nlohmann::json timings = nlohmann::json::object();
  for (const auto& t : result.timings)
    timings[t.stage] = t.seconds;
  m["timings"] = timings;
  m["pipeline_seconds"] = result.pipeline_seconds();
  m["warnings"] = result.warnings;
  if (result.report)
    m["satisfaction"] = result.report->satisfaction;
  auto os = open("manifest.json");
  os << m.dump(2) << "\n";
}

} // namespace ecfcc
