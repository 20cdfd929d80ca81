#include "ecfcc/sampling.hpp"

#include "ecfcc/error.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace ecfcc {

namespace {

std::mt19937_64
seeded_engine(std::uint64_t seed, std::uint64_t stream)
{
  std::seed_seq seq{ static_cast<std::uint32_t>(seed & 0xffffffffu),
                     static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(stream & 0xffffffffu),
                     static_cast<std::uint32_t>(stream >> 32) };
  return std::mt19937_64(seq);
}

template<class... Ts>
struct overloaded : Ts...
{
  using Ts::operator()...;
};

} // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
  : engine_(seeded_engine(seed, stream))
{
}

double
Rng::uniform()
{
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t
Rng::below(std::uint64_t bound)
{
  if (bound <= 1)
    return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return r % bound;
}

double
Rng::normal()
{
  const double u1 = 1.0 - uniform(); // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double
Rng::gamma(double shape)
{
  if (shape < 1.0) {
    const double boost = std::pow(1.0 - uniform(), 1.0 / shape);
    return gamma(shape + 1.0) * boost;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = 1.0 - uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x)
      return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return d * v;
  }
}

double
Rng::weibull(double shape, double scale)
{
  return scale * std::pow(-std::log(1.0 - uniform()), 1.0 / shape);
}

double
Distribution::draw(Rng& rng) const
{
  return std::visit(
    overloaded{
      [&](const UniformDist& d) { return rng.uniform(d.lo, d.hi); },
      [&](const GammaDist& d) { return d.scale * d.theta * rng.gamma(d.k); },
      [&](const WeibullDist& d) { return d.scale * rng.weibull(d.k, d.theta); },
      [&](const GaussianDist& d) { return d.mean + std::sqrt(d.variance) * rng.normal(); },
      [&](const MixtureDist& d) {
        return rng.uniform() < d.weight ? d.first->draw(rng) : d.second->draw(rng);
      } },
    params);
}

double
Distribution::mean() const
{
  return std::visit(
    overloaded{ [](const UniformDist& d) { return 0.5 * (d.lo + d.hi); },
                [](const GammaDist& d) { return d.scale * d.k * d.theta; },
                [](const WeibullDist& d) {
                  return d.scale * d.theta * std::tgamma(1.0 + 1.0 / d.k);
                },
                [](const GaussianDist& d) { return d.mean; },
                [](const MixtureDist& d) {
                  return d.weight * d.first->mean() + (1.0 - d.weight) * d.second->mean();
                } },
    params);
}

double
Distribution::variance() const
{
  return std::visit(
    overloaded{ [](const UniformDist& d) { return (d.hi - d.lo) * (d.hi - d.lo) / 12.0; },
                [](const GammaDist& d) { return d.scale * d.scale * d.k * d.theta * d.theta; },
                [](const WeibullDist& d) {
                  const double g1 = std::tgamma(1.0 + 1.0 / d.k);
                  const double g2 = std::tgamma(1.0 + 2.0 / d.k);
                  return d.scale * d.scale * d.theta * d.theta * (g2 - g1 * g1);
                },
                [](const GaussianDist& d) { return d.variance; },
                [](const MixtureDist& d) {
                  const double m1 = d.first->mean(), m2 = d.second->mean();
                  const double s1 = d.first->variance() + m1 * m1;
                  const double s2 = d.second->variance() + m2 * m2;
                  const double m = d.weight * m1 + (1.0 - d.weight) * m2;
                  return d.weight * s1 + (1.0 - d.weight) * s2 - m * m;
                } },
    params);
}

std::string
Distribution::describe() const
{
  std::ostringstream os;
  os.precision(17);
  std::visit(overloaded{ [&](const UniformDist& d) { os << "uniform(" << d.lo << "," << d.hi << ")"; },
                         [&](const GammaDist& d) {
                           os << "gamma(" << d.k << "," << d.theta << "," << d.scale << ")";
                         },
                         [&](const WeibullDist& d) {
                           os << "weibull(" << d.k << "," << d.theta << "," << d.scale << ")";
                         },
                         [&](const GaussianDist& d) {
                           os << "gaussian(" << d.mean << "," << d.variance << ")";
                         },
                         [&](const MixtureDist& d) {
                           os << "mixture(" << d.weight << ";" << d.first->describe() << ";"
                              << d.second->describe() << ")";
                         } },
             params);
  return os.str();
}

void
Distribution::validate() const
{
  auto fail = [this](const std::string& why) {
    throw ConfigError("invalid distribution " + describe() + ": " + why);
  };
  std::visit(overloaded{ [&](const UniformDist& d) {
                          if (!(d.lo <= d.hi))
                            fail("requires lo <= hi");
                        },
                         [&](const GammaDist& d) {
                           if (!(d.k > 0.0 && d.theta > 0.0 && std::isfinite(d.scale)))
                             fail("requires k > 0, theta > 0");
                         },
                         [&](const WeibullDist& d) {
                           if (!(d.k > 0.0 && d.theta > 0.0 && std::isfinite(d.scale)))
                             fail("requires k > 0, theta > 0");
                         },
                         [&](const GaussianDist& d) {
                           if (!(d.variance >= 0.0 && std::isfinite(d.mean)))
                             fail("requires variance >= 0");
                         },
                         [&](const MixtureDist& d) {
                           if (!(d.weight >= 0.0 && d.weight <= 1.0))
                             fail("mixture weight must lie in [0, 1]");
                           if (!d.first || !d.second)
                             fail("mixture needs two components");
                           d.first->validate();
                           d.second->validate();
                         } },
             params);
}

Distribution
make_mixture(double weight, Distribution first, Distribution second)
{
  return Distribution{ MixtureDist{ weight,
                                    std::make_shared<const Distribution>(std::move(first)),
                                    std::make_shared<const Distribution>(std::move(second)) } };
}

void
SamplerSpec::validate() const
{
  if (dims.empty())
    throw ConfigError("sampler needs at least one dimension");
  for (const auto& d : dims)
    d.validate();
}

Eigen::MatrixXd
sample(const SamplerSpec& spec, int count, Rng& rng)
{
  spec.validate();
  if (count < 1)
    throw PreconditionError("sample count must be >= 1");
  Eigen::MatrixXd out(count, spec.dimension());
  for (int r = 0; r < count; ++r)
    for (int c = 0; c < spec.dimension(); ++c)
      out(r, c) = spec.dims[static_cast<std::size_t>(c)].draw(rng);
  return out;
}

Eigen::MatrixXd
sample(const SamplerSpec& spec, int count)
{
  Rng rng(spec.seed);
  return sample(spec, count, rng);
}

} // namespace ecfcc
