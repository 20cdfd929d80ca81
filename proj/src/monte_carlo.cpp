#include "ecfcc/monte_carlo.hpp"

#include "ecfcc/error.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

namespace ecfcc {

std::pair<double, double>
wilson_interval(long long successes, long long trials, double z)
{
  if (trials <= 0)
    return { 0.0, 1.0 };
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (phat + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
  return { std::max(0.0, centre - half), std::min(1.0, centre + half) };
}

namespace {

struct ChunkSums
{
  long long satisfied = 0;
  Eigen::VectorXd cost;
  Eigen::VectorXd state_sum;
  Eigen::VectorXd state_sq;
};

} // namespace

McReport
rollout(const ConcatenatedSystem& csys,
        const Eigen::VectorXd& x0,
        const Eigen::VectorXd& u_bar,
        const PolytopeConstraints& constraints,
        const SamplerSpec& sampler,
        const TrackingWeights& weights,
        const RolloutOptions& options)
{
  sampler.validate();
  if (options.n_rollouts < 1)
    throw PreconditionError("need at least one rollout");
  if (sampler.dimension() != csys.p)
    throw DimensionError("sampler has " + std::to_string(sampler.dimension()) +
                         " dimensions, system disturbance has " + std::to_string(csys.p));
  if (u_bar.size() != csys.input_dim() || x0.size() != csys.n)
    throw DimensionError("rollout: input or initial state has the wrong length");
  const int nx = csys.state_dim(), n = csys.n, m = csys.m, N = csys.horizon;
  if (weights.x_ref.size() != nx || weights.Q.rows() != nx || weights.R.rows() != m * N)
    throw DimensionError("rollout: tracking weights do not match the system");
  if (!constraints.rows.empty())
    constraints.validate(nx);

  const Eigen::MatrixXd P = constraints.P();
  const Eigen::VectorXd q = constraints.q();
  const Eigen::VectorXd x_nominal = csys.Abar * x0 + csys.Bbar * u_bar;

  Eigen::VectorXd input_cost = Eigen::VectorXd::Zero(N + 1);
  for (int k = 0; k < N; ++k) {
    const auto uk = u_bar.segment(k * m, m);
    input_cost(k) = uk.dot(weights.R.block(k * m, k * m, m, m) * uk);
  }

  const int chunk = std::max(1, options.chunk_size);
  const int chunks = (options.n_rollouts + chunk - 1) / chunk;
  std::vector<ChunkSums> sums(static_cast<std::size_t>(chunks));

  auto run_chunk = [&](int c) {
    ChunkSums& acc = sums[static_cast<std::size_t>(c)];
    acc.cost = Eigen::VectorXd::Zero(N + 1);
    acc.state_sum = Eigen::VectorXd::Zero(nx);
    acc.state_sq = Eigen::VectorXd::Zero(nx);
    Rng rng(sampler.seed, static_cast<std::uint64_t>(c) + 1);
    const int begin = c * chunk;
    const int end = std::min(options.n_rollouts, begin + chunk);
    Eigen::VectorXd w(csys.disturbance_dim());
    for (int r = begin; r < end; ++r) {
      for (int k = 0; k < N; ++k)
        for (int d = 0; d < csys.p; ++d)
          w(k * csys.p + d) = sampler.dims[static_cast<std::size_t>(d)].draw(rng);
      const Eigen::VectorXd x = x_nominal + csys.Gbar * w;
      if (P.rows() == 0 || ((P * x - q).array() <= 0.0).all())
        ++acc.satisfied;
      const Eigen::VectorXd e = x - weights.x_ref;
      for (int k = 0; k <= N; ++k) {
        const auto ek = e.segment(k * n, n);
        acc.cost(k) += ek.dot(weights.Q.block(k * n, k * n, n, n) * ek);
      }
      acc.state_sum += x;
      acc.state_sq += x.cwiseProduct(x);
    }
  };

  int threads = options.threads > 0 ? options.threads
                                    : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, chunks);
  if (threads <= 1) {
    for (int c = 0; c < chunks; ++c)
      run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (int c = t; c < chunks; c += threads)
          run_chunk(c);
      });
    for (auto& th : pool)
      th.join();
  }

  // Reduce in chunk order so sums are independent of scheduling.
  McReport report;
  report.n_rollouts = options.n_rollouts;
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(N + 1);
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(nx), s2 = Eigen::VectorXd::Zero(nx);
  for (const auto& acc : sums) {
    report.satisfied += acc.satisfied;
    cost += acc.cost;
    s1 += acc.state_sum;
    s2 += acc.state_sq;
  }
  const double total = options.n_rollouts;
  report.satisfaction = static_cast<double>(report.satisfied) / total;
  report.wilson_interval = wilson_interval(report.satisfied, options.n_rollouts);
  report.mean_stage_cost = cost / total + input_cost;
  const Eigen::VectorXd mean = s1 / total;
  const Eigen::VectorXd var = (s2 / total - mean.cwiseProduct(mean)).cwiseMax(0.0);
  report.mean_trajectory = Eigen::Map<const Eigen::MatrixXd>(mean.data(), n, N + 1).transpose();
  const Eigen::VectorXd sd = var.cwiseSqrt();
  report.std_trajectory = Eigen::Map<const Eigen::MatrixXd>(sd.data(), n, N + 1).transpose();
  return report;
}

} // namespace ecfcc
