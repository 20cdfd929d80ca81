#pragma once

#include "ecfcc/ecf.hpp"

#include <Eigen/Dense>

#include <complex>
#include <span>

namespace ecfcc {

/// A scalar characteristic function whose modulus is dominated by the
/// Gaussian envelope exp(-envelope_variance() t^2 / 2).
class CharacteristicFunction
{
public:
  virtual ~CharacteristicFunction() = default;

  virtual void evaluate(std::span<const double> t,
                        std::span<std::complex<double>> out) const = 0;
  /// The Gil-Pelaez integrand tends to mean() - x as t -> 0.
  virtual double mean() const = 0;
  virtual double envelope_variance() const = 0;
};

class SmoothedEcfFunction final : public CharacteristicFunction
{
public:
  explicit SmoothedEcfFunction(const ProjectedEcf& ecf)
    : ecf_(ecf)
  {
  }
  void evaluate(std::span<const double> t, std::span<std::complex<double>> out) const override
  {
    ecf_.evaluate(t, out);
  }
  double mean() const override { return ecf_.mean(); }
  double envelope_variance() const override { return ecf_.sigma2; }

private:
  const ProjectedEcf& ecf_;
};

class GaussianCharacteristicFunction final : public CharacteristicFunction
{
public:
  GaussianCharacteristicFunction(double mean, double variance)
    : mean_(mean)
    , variance_(variance)
  {
  }
  void evaluate(std::span<const double> t, std::span<std::complex<double>> out) const override;
  double mean() const override { return mean_; }
  double envelope_variance() const override { return variance_; }

private:
  double mean_;
  double variance_;
};

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule
{
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  static GaussLegendreRule make(int order);
};

struct CdfTable
{
  Eigen::VectorXd grid;
  Eigen::VectorXd values;
  double x_min = 0.0;
  double x_max = 0.0;
  double quad_tol = 0.0;
  /// Upper integration limit used for the frequency integral.
  double truncation = 0.0;
  /// Accumulated panel error estimate plus the tail bound.
  double error_estimate = 0.0;

  int size() const { return static_cast<int>(grid.size()); }
};

struct InversionOptions
{
  int grid_size = 1000;
  double quad_tol = 1e-7;
  /// Multiplies the envelope-derived truncation point.
  double truncation_factor = 1.0;
  int max_panels = 1 << 15;
};

/// Smallest T with tail bound exp(-v T^2 / 2) / (pi v T^2) <= tail.
double truncation_point(double envelope_variance, double tail);

/// Gil-Pelaez inversion on a uniform grid spanning [x_min, x_max].
CdfTable invert(const CharacteristicFunction& cf,
                double x_min,
                double x_max,
                const InversionOptions& options = {});

/// Inversion over the sample domain [min y_j, max y_j].
CdfTable invert(const ProjectedEcf& ecf, const InversionOptions& options = {});

} // namespace ecfcc
