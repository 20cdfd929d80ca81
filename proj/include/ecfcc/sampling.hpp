#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace ecfcc {

/// Seeded generator with fixed, documented transforms so that streams are
/// bit-identical across standard libraries:
///   * engine: std::mt19937_64 seeded through std::seed_seq{seed_lo, seed_hi, stream}
///   * uniform: top 53 bits of one engine draw, scaled to [0, 1)
///   * normal: Box-Muller on two uniforms (no cached spare)
///   * gamma: Marsaglia-Tsang squeeze; shape < 1 boosted by U^(1/k)
///   * weibull: inverse transform
class Rng
{
public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound);
  double normal();
  double gamma(double shape);
  double weibull(double shape, double scale);

private:
  std::mt19937_64 engine_;
};

struct Distribution;

struct UniformDist
{
  double lo = 0.0;
  double hi = 1.0;
};

/// scale * Gam(k, theta), theta the scale parameter (mean k * theta).
struct GammaDist
{
  double k = 1.0;
  double theta = 1.0;
  double scale = 1.0;
};

/// scale * Weib(k, theta), k shape and theta scale.
struct WeibullDist
{
  double k = 1.0;
  double theta = 1.0;
  double scale = 1.0;
};

struct GaussianDist
{
  double mean = 0.0;
  double variance = 1.0;
};

/// f * first + (1 - f) * second with f ~ Bernoulli(weight).
struct MixtureDist
{
  double weight = 0.5;
  std::shared_ptr<const Distribution> first;
  std::shared_ptr<const Distribution> second;
};

struct Distribution
{
  std::variant<UniformDist, GammaDist, WeibullDist, GaussianDist, MixtureDist> params;

  double draw(Rng& rng) const;
  double mean() const;
  double variance() const;
  std::string describe() const;
  /// Throws ConfigError when parameters leave the family's domain.
  void validate() const;
};

Distribution make_mixture(double weight, Distribution first, Distribution second);

/// Independent per-dimension distributions and the seed of the stream.
struct SamplerSpec
{
  std::vector<Distribution> dims;
  std::uint64_t seed = 0;

  int dimension() const { return static_cast<int>(dims.size()); }
  void validate() const;
};

/// count x dims matrix of i.i.d. draws, drawn row by row.
Eigen::MatrixXd sample(const SamplerSpec& spec, int count);
Eigen::MatrixXd sample(const SamplerSpec& spec, int count, Rng& rng);

} // namespace ecfcc
