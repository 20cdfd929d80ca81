#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ecfcc {

/// Disturbance data in both per-step (N_s x p) and concatenated
/// trajectory (N_s x pN) layouts.
struct DisturbanceSamples
{
  Eigen::MatrixXd per_step;
  Eigen::MatrixXd trajectory;
  int horizon = 1;

  int count() const { return static_cast<int>(trajectory.rows()); }
  int p() const { return static_cast<int>(per_step.cols()); }
};

/// Assembles N_s trajectory samples from a per-step pool. Column block 0
/// is the pool itself; each further block k is an independent seeded
/// Fisher-Yates permutation of the pool (stream k of `seed`), so every
/// block keeps the per-step marginal.
DisturbanceSamples build_trajectory_samples(const Eigen::MatrixXd& per_step,
                                            int horizon,
                                            std::uint64_t seed = 0);

/// Ingests raw N_s x pN trajectories; the per-step pool is the vertical
/// stack of the N column blocks.
DisturbanceSamples trajectory_samples_from_rows(const Eigen::MatrixXd& trajectory,
                                                int p,
                                                int horizon);

/// Per-step kernel covariance and its block-diagonal replication.
struct SmoothingMatrix
{
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd sigma_bar;
  std::vector<std::string> warnings;

  static SmoothingMatrix replicate(const Eigen::MatrixXd& sigma, int horizon);
};

/// Scalar smoothed ECF of y = d^T wbar:
///   phi(t) = sum_j alpha_j exp(i t y_j) exp(-sigma2 t^2 / 2).
struct ProjectedEcf
{
  Eigen::VectorXd y;
  double sigma2 = 0.0;
  Eigen::VectorXd weights;

  std::complex<double> evaluate(double t) const;
  /// Batched evaluation, out[k] = phi(t[k]).
  void evaluate(std::span<const double> t, std::span<std::complex<double>> out) const;
  double mean() const { return weights.dot(y); }
  double min() const { return y.minCoeff(); }
  double max() const { return y.maxCoeff(); }
};

/// Uniform-weight ECF over raw scalar samples.
ProjectedEcf make_scalar_ecf(const Eigen::VectorXd& y, double sigma2);

std::complex<double> evaluate_ecf(const ProjectedEcf& ecf, double t);

ProjectedEcf project(const DisturbanceSamples& samples,
                     const SmoothingMatrix& sigma,
                     const Eigen::VectorXd& direction);

struct MomentEstimates
{
  Eigen::VectorXd mean;
  Eigen::VectorXd second;
  Eigen::VectorXd cov_diag;
};

struct MomentOptions
{
  /// Remove the kernel variance from cov_diag so it estimates the raw
  /// data variance; `second` always carries the smoothed value.
  bool debias_smoothing = true;
};

/// First two moments from the derivatives of the concatenated smoothed ECF
/// at the origin: mean_k = avg w_k, second_k = avg w_k^2 + Sigma_bar(k, k).
MomentEstimates moments(const DisturbanceSamples& samples,
                        const SmoothingMatrix& sigma,
                        const MomentOptions& options = {});

/// Diagonal plug-in bandwidth, Sigma_dd = (1.06 s_d N_s^(-1/5))^2.
SmoothingMatrix select_bandwidth(const Eigen::MatrixXd& per_step, int horizon);

struct ConfidenceMargin
{
  double alpha = 0.05;
  double eps_E = 0.0;
  double eps_D = 0.0;
  double eps = 0.0;

  double total() const { return eps + eps_E + eps_D; }
};

/// DKW half-width eps_E = sqrt(ln(2 / alpha) / (2 N_s)).
ConfidenceMargin dkw_margin(int sample_count, double alpha, double eps_D, double eps);

} // namespace ecfcc
