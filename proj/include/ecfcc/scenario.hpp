#pragma once

#include "ecfcc/chance_program.hpp"
#include "ecfcc/ecf.hpp"
#include "ecfcc/inversion.hpp"
#include "ecfcc/lti.hpp"
#include "ecfcc/monte_carlo.hpp"
#include "ecfcc/qp.hpp"
#include "ecfcc/sampling.hpp"
#include "ecfcc/sandwich.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ecfcc {

struct EcfSettings
{
  int samples = 1000;
  int grid_points = 1000;
  double pwa_error = 1e-3;
  int max_segments = 20;
  double quad_tol = 1e-7;
  /// Fixed per-step smoothing matrix; the plug-in rule when absent.
  std::optional<Eigen::MatrixXd> sigma;
  bool debias_smoothing = true;
  double eps_D = 0.0;
  double alpha = 0.05;
  bool margin = false;
};

struct DisturbanceSource
{
  enum class Mode
  {
    per_step,
    trajectory,
  };

  std::optional<SamplerSpec> sampler;
  std::optional<std::filesystem::path> csv;
  Mode mode = Mode::per_step;
};

struct ValidationSettings
{
  bool enabled = true;
  int rollouts = 100000;
  std::uint64_t seed = 1;
  /// Defaults to the disturbance sampler reseeded with `seed`.
  std::optional<SamplerSpec> sampler;
};

struct ScenarioConfig
{
  std::string name;
  std::filesystem::path source;
  LtiSystem system;
  double dt = 1.0;
  Eigen::VectorXd x0;
  Eigen::VectorXd x_ref; ///< n(N+1)
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  PolytopeConstraints constraints;
  double risk_budget = 0.2;
  EcfSettings ecf;
  DisturbanceSource disturbance;
  ValidationSettings validation;
  QpSettings solver;

  /// Sampler used for Monte Carlo validation with the validation seed.
  SamplerSpec validation_sampler() const;
  TrackingWeights tracking() const { return { x_ref, Q, R }; }
  nlohmann::json to_json() const;
};

/// Parses a scenario file (YAML). Errors carry "file:line:column".
ScenarioConfig load_scenario(const std::filesystem::path& path);
ScenarioConfig parse_scenario(const std::string& text,
                              const std::string& source_name = "<string>",
                              const std::filesystem::path& base_dir = {});

SamplerSpec parse_sampler(const std::string& yaml_text, const std::string& source_name = "<string>");

struct PipelineOptions
{
  std::optional<std::uint64_t> seed;
  bool margin = false;
  /// Restrict to a subset of constraint rows.
  std::optional<std::vector<int>> rows;
  bool validate = true;
  int threads = 0;
};

struct StageTiming
{
  std::string stage;
  double seconds = 0.0;
};

struct PipelineResult
{
  ConcatenatedSystem csys;
  PolytopeConstraints constraints;
  std::vector<int> row_ids;
  SmoothingMatrix smoothing;
  std::vector<double> row_sigma2;
  std::vector<CdfTable> tables;
  std::vector<PwaUnderApprox> pwas;
  MomentEstimates moments;
  ChanceProgram program;
  std::optional<ConfidenceMargin> margin;
  ControlSolution solution;
  std::optional<McReport> report;
  std::vector<StageTiming> timings;
  std::vector<std::string> warnings;
  std::uint64_t sampler_seed = 0;
  int sample_count = 0;

  double pipeline_seconds() const;
  /// sum_i max(0, 1 - cap_i): the smallest total risk the program allows.
  double risk_floor_sum() const;
};

/// The per-row half of the pipeline: samples, bandwidth, then for every
/// selected row its projection, CDF table and PWA. Fills csys,
/// constraints, row_ids, smoothing, row_sigma2, tables and pwas.
PipelineResult estimate_rows(const ScenarioConfig& config,
                             const PipelineOptions& options = {},
                             DisturbanceSamples* samples_out = nullptr);

/// Samples -> per-row CDF tables and PWAs -> moments -> program -> solve
/// -> Monte Carlo validation.
PipelineResult run_pipeline(const ScenarioConfig& config, const PipelineOptions& options = {});

/// Builds the program from externally supplied PWAs and moments.
ChanceProgram assemble_for_scenario(const ScenarioConfig& config,
                                    const ConcatenatedSystem& csys,
                                    const PolytopeConstraints& constraints,
                                    const std::vector<PwaUnderApprox>& pwas,
                                    const MomentEstimates& moments);

/// Writes manifest.json, solution.json, cdf_row_<i>.csv, pwa_row_<i>.csv,
/// program.txt and, when validated, mc_report.json and trajectory_stats.csv.
void write_artifacts(const PipelineResult& result,
                     const ScenarioConfig& config,
                     const PipelineOptions& options,
                     const std::filesystem::path& out_dir);

/// Parses "0,3,5-7".
std::vector<int> parse_row_subset(const std::string& text);

} // namespace ecfcc
