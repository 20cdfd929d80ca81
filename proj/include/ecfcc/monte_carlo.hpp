#pragma once

#include "ecfcc/lti.hpp"
#include "ecfcc/sampling.hpp"

#include <Eigen/Dense>

#include <utility>

namespace ecfcc {

struct McReport
{
  int n_rollouts = 0;
  long long satisfied = 0;
  double satisfaction = 0.0;
  std::pair<double, double> wilson_interval{ 0.0, 1.0 };
  /// Stage cost per step k = 0..N (input term absent at k = N).
  Eigen::VectorXd mean_stage_cost;
  /// (N+1) x n matrices of per-step state statistics.
  Eigen::MatrixXd mean_trajectory;
  Eigen::MatrixXd std_trajectory;
};

/// 95% Wilson score interval for `successes` out of `trials`.
std::pair<double, double> wilson_interval(long long successes, long long trials, double z = 1.959963984540054);

struct RolloutOptions
{
  int n_rollouts = 100000;
  /// Rollouts are split into fixed chunks; chunk c draws from stream c of
  /// the sampler seed, so results do not depend on the thread count.
  int chunk_size = 4096;
  int threads = 0; ///< 0 = hardware concurrency
};

struct TrackingWeights
{
  Eigen::VectorXd x_ref; ///< n(N+1)
  Eigen::MatrixXd Q;     ///< n(N+1) x n(N+1)
  Eigen::MatrixXd R;     ///< mN x mN
};

/// Rolls out the open-loop input under i.i.d. per-step disturbances from
/// `sampler` and checks the joint constraint P xbar <= q on every rollout.
McReport rollout(const ConcatenatedSystem& csys,
                 const Eigen::VectorXd& x0,
                 const Eigen::VectorXd& u_bar,
                 const PolytopeConstraints& constraints,
                 const SamplerSpec& sampler,
                 const TrackingWeights& weights,
                 const RolloutOptions& options = {});

} // namespace ecfcc
