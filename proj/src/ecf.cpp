#include "ecfcc/ecf.hpp"

#include "ecfcc/error.hpp"
#include "ecfcc/sampling.hpp"

#include <cmath>
#include <numeric>

namespace ecfcc {

DisturbanceSamples
build_trajectory_samples(const Eigen::MatrixXd& per_step, int horizon, std::uint64_t seed)
{
  const auto count = per_step.rows();
  if (count < 2)
    throw InsufficientDataError("need at least 2 disturbance samples, got " +
                                std::to_string(count));
  if (horizon < 1)
    throw ConfigError("horizon must be >= 1");
  const auto p = per_step.cols();

  DisturbanceSamples out;
  out.per_step = per_step;
  out.horizon = horizon;
  out.trajectory.resize(count, p * horizon);
  out.trajectory.leftCols(p) = per_step;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(count));
  for (int k = 1; k < horizon; ++k) {
    std::iota(order.begin(), order.end(), Eigen::Index{ 0 });
    Rng rng(seed, static_cast<std::uint64_t>(k));
    for (auto i = count - 1; i > 0; --i) {
      const auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    for (Eigen::Index r = 0; r < count; ++r)
      out.trajectory.block(r, k * p, 1, p) = per_step.row(order[static_cast<std::size_t>(r)]);
  }
  return out;
}

DisturbanceSamples
trajectory_samples_from_rows(const Eigen::MatrixXd& trajectory, int p, int horizon)
{
  if (trajectory.rows() < 2)
    throw InsufficientDataError("need at least 2 trajectory samples");
  if (p < 1 || horizon < 1 || trajectory.cols() != static_cast<Eigen::Index>(p) * horizon)
    throw DimensionError("trajectory data has " + std::to_string(trajectory.cols()) +
                         " columns, expected p * N = " + std::to_string(p * horizon));
  DisturbanceSamples out;
  out.trajectory = trajectory;
  out.horizon = horizon;
  const auto count = trajectory.rows();
  out.per_step.resize(count * horizon, p);
  for (int k = 0; k < horizon; ++k)
    out.per_step.middleRows(k * count, count) = trajectory.middleCols(k * p, p);
  return out;
}

SmoothingMatrix
SmoothingMatrix::replicate(const Eigen::MatrixXd& sigma, int horizon)
{
  if (sigma.rows() != sigma.cols())
    throw DimensionError("smoothing matrix must be square");
  if (!sigma.isApprox(sigma.transpose(), 1e-12))
    throw ConfigError("smoothing matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
  if (sigma.size() > 0 && eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, sigma.norm()))
    throw ConfigError("smoothing matrix must be positive semidefinite");

  SmoothingMatrix out;
  out.sigma = sigma;
  const auto p = sigma.rows();
  out.sigma_bar = Eigen::MatrixXd::Zero(p * horizon, p * horizon);
  for (int k = 0; k < horizon; ++k)
    out.sigma_bar.block(k * p, k * p, p, p) = sigma;
  return out;
}

std::complex<double>
ProjectedEcf::evaluate(double t) const
{
  // Dividing by the accumulated weight makes phi(0) = 1 exactly.
  double re = 0.0, im = 0.0, total = 0.0;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    re += weights(j) * std::cos(t * y(j));
    im += weights(j) * std::sin(t * y(j));
    total += weights(j);
  }
  const double damp = std::exp(-0.5 * sigma2 * t * t) / total;
  return { re * damp, im * damp };
}

void
ProjectedEcf::evaluate(std::span<const double> t, std::span<std::complex<double>> out) const
{
  if (t.size() != out.size())
    throw DimensionError("ECF batch evaluation: size mismatch");
  for (std::size_t k = 0; k < t.size(); ++k)
    out[k] = evaluate(t[k]);
}

ProjectedEcf
make_scalar_ecf(const Eigen::VectorXd& y, double sigma2)
{
  if (y.size() < 1)
    throw InsufficientDataError("ECF needs at least one sample");
  if (!(sigma2 >= 0.0))
    throw ConfigError("smoothing variance must be nonnegative");
  ProjectedEcf out;
  out.y = y;
  out.sigma2 = sigma2;
  out.weights = Eigen::VectorXd::Constant(y.size(), 1.0 / static_cast<double>(y.size()));
  return out;
}

std::complex<double>
evaluate_ecf(const ProjectedEcf& ecf, double t)
{
  return ecf.evaluate(t);
}

ProjectedEcf
project(const DisturbanceSamples& samples,
        const SmoothingMatrix& sigma,
        const Eigen::VectorXd& direction)
{
  if (direction.size() != samples.trajectory.cols())
    throw DimensionError("projection direction has length " + std::to_string(direction.size()) +
                         ", expected " + std::to_string(samples.trajectory.cols()));
  if (sigma.sigma_bar.rows() != direction.size())
    throw DimensionError("smoothing matrix does not match the concatenated disturbance");
  const double sigma2 = std::max(0.0, direction.dot(sigma.sigma_bar * direction));
  return make_scalar_ecf(samples.trajectory * direction, sigma2);
}

MomentEstimates
moments(const DisturbanceSamples& samples,
        const SmoothingMatrix& sigma,
        const MomentOptions& options)
{
  const auto& w = samples.trajectory;
  if (w.rows() < 1)
    throw InsufficientDataError("moments need at least one sample");
  if (sigma.sigma_bar.rows() != w.cols())
    throw DimensionError("smoothing matrix does not match the concatenated disturbance");
  const double inv = 1.0 / static_cast<double>(w.rows());

  MomentEstimates out;
  out.mean = w.colwise().sum().transpose() * inv;
  const Eigen::VectorXd kernel = sigma.sigma_bar.diagonal();
  out.second = w.array().square().colwise().sum().transpose() * inv;
  out.second += kernel;
  Eigen::VectorXd var = out.second.array() - out.mean.array().square();
  if (options.debias_smoothing)
    var -= kernel;
  out.cov_diag = var.cwiseMax(0.0);
  return out;
}

SmoothingMatrix
select_bandwidth(const Eigen::MatrixXd& per_step, int horizon)
{
  const auto count = per_step.rows();
  if (count < 2)
    throw InsufficientDataError("bandwidth selection needs at least 2 samples");
  const auto p = per_step.cols();
  const double factor = 1.06 * std::pow(static_cast<double>(count), -0.2);

  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(p, p);
  std::vector<std::string> warnings;
  for (Eigen::Index d = 0; d < p; ++d) {
    const auto col = per_step.col(d);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / static_cast<double>(count - 1);
    if (!(var > 0.0)) {
      warnings.push_back("disturbance component " + std::to_string(d) +
                         " has zero sample variance; treated as a point mass");
      continue;
    }
    const double h = factor * std::sqrt(var);
    sigma(d, d) = h * h;
  }
  auto out = SmoothingMatrix::replicate(sigma, horizon);
  out.warnings = std::move(warnings);
  return out;
}

ConfidenceMargin
dkw_margin(int sample_count, double alpha, double eps_D, double eps)
{
  if (!(alpha > 0.0 && alpha < 1.0))
    throw PreconditionError("confidence parameter alpha must lie in (0, 1)");
  if (sample_count < 1)
    throw PreconditionError("DKW margin needs at least one sample");
  if (!(eps_D >= 0.0) || !(eps >= 0.0))
    throw PreconditionError("margin components must be nonnegative");
  ConfidenceMargin out;
  out.alpha = alpha;
  out.eps_E = std::sqrt(std::log(2.0 / alpha) / (2.0 * sample_count));
  out.eps_D = eps_D;
  out.eps = eps;
  return out;
}

} // namespace ecfcc
