#include "ecfcc/inversion.hpp"

#include "ecfcc/error.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace ecfcc {

void
GaussianCharacteristicFunction::evaluate(std::span<const double> t,
                                         std::span<std::complex<double>> out) const
{
  for (std::size_t k = 0; k < t.size(); ++k)
    out[k] = std::polar(std::exp(-0.5 * variance_ * t[k] * t[k]), mean_ * t[k]);
}

GaussLegendreRule
GaussLegendreRule::make(int order)
{
  if (order < 1)
    throw PreconditionError("Gauss-Legendre order must be >= 1");
  GaussLegendreRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const int half = (order + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16)
        break;
    }
    rule.nodes(i) = -x;
    rule.nodes(order - 1 - i) = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights(i) = w;
    rule.weights(order - 1 - i) = w;
  }
  return rule;
}

double
truncation_point(double envelope_variance, double tail)
{
  if (!(envelope_variance > 0.0))
    throw DegenerateSmoothingError("truncation needs a positive envelope variance");
  auto bound = [&](double T) {
    return std::exp(-0.5 * envelope_variance * T * T) /
           (std::numbers::pi * envelope_variance * T * T);
  };
  double lo = 1e-12 / std::sqrt(envelope_variance);
  double hi = 1.0 / std::sqrt(envelope_variance);
  while (bound(hi) > tail)
    hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (bound(mid) > tail ? lo : hi) = mid;
  }
  return hi;
}

namespace {

constexpr int kPanelOrder = 16;

/// Integrates Im(exp(-i t x) phi(t)) / t over [a, b] for every grid point.
class PanelIntegrator
{
public:
  PanelIntegrator(const CharacteristicFunction& cf, double x0, double dx, int count)
    : cf_(cf)
    , rule_(GaussLegendreRule::make(kPanelOrder))
    , x0_(x0)
    , dx_(dx)
    , count_(count)
    , t_(kPanelOrder)
    , phi_(kPanelOrder)
  {
  }

  Eigen::VectorXd integrate(double a, double b)
  {
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int k = 0; k < kPanelOrder; ++k)
      t_[k] = mid + half * rule_.nodes(k);
    cf_.evaluate(t_, phi_);

    Eigen::VectorXd out = Eigen::VectorXd::Zero(count_);
    for (int k = 0; k < kPanelOrder; ++k) {
      const double t = t_[k];
      const double w = half * rule_.weights(k) / t;
      // exp(-i t x_p) by rotation along the uniform grid.
      std::complex<double> z = std::polar(1.0, -t * x0_) * phi_[k];
      const std::complex<double> step = std::polar(1.0, -t * dx_);
      for (int p = 0; p < count_; ++p) {
        out(p) += w * z.imag();
        z *= step;
        if ((p & 63) == 63) // re-anchor to bound rotation drift
          z = std::polar(1.0, -t * (x0_ + (p + 1) * dx_)) * phi_[k];
      }
    }
    return out;
  }

private:
  const CharacteristicFunction& cf_;
  GaussLegendreRule rule_;
  double x0_;
  double dx_;
  int count_;
  std::vector<double> t_;
  std::vector<std::complex<double>> phi_;
};

struct Panel
{
  double a;
  double b;
  Eigen::VectorXd coarse;
};

} // namespace

CdfTable
invert(const CharacteristicFunction& cf, double x_min, double x_max, const InversionOptions& options)
{
  const double v = cf.envelope_variance();
  if (!(v > 0.0))
    throw DegenerateSmoothingError(
      "inversion requires a positive smoothing variance (sigma2 = 0 is unsupported)");
  if (options.grid_size < 2)
    throw PreconditionError("grid needs at least 2 points");
  if (!(options.quad_tol > 0.0))
    throw PreconditionError("quadrature tolerance must be positive");
  if (!(x_max > x_min))
    throw DomainError("inversion domain is empty: all projected samples coincide");

  const int np = options.grid_size;
  const double dx = (x_max - x_min) / (np - 1);
  const double tol = options.quad_tol;

  CdfTable table;
  table.x_min = x_min;
  table.x_max = x_max;
  table.quad_tol = tol;
  table.grid = Eigen::VectorXd::LinSpaced(np, x_min, x_max);

  const double T = options.truncation_factor * truncation_point(v, 0.5 * tol);
  table.truncation = T;

  // Taylor panel on [0, t0]: the integrand is even in t with value mean - x
  // at the origin, so the neglected term is O(t0^3).
  const double t0 = 1e-6 * T;
  Eigen::VectorXd integral = t0 * (cf.mean() - table.grid.array()).matrix();

  PanelIntegrator integrator(cf, x_min, dx, np);
  const double length = T - t0;
  const double budget = std::numbers::pi * 0.5 * tol; // on the integral, before the 1/pi
  const int initial = 16;

  std::vector<Panel> stack;
  for (int i = initial - 1; i >= 0; --i) {
    const double a = t0 + length * i / initial, b = t0 + length * (i + 1) / initial;
    stack.push_back({ a, b, integrator.integrate(a, b) });
  }
  double error = 0.0;
  int panels = initial;
  while (!stack.empty()) {
    Panel panel = std::move(stack.back());
    stack.pop_back();
    const double mid = 0.5 * (panel.a + panel.b);
    Eigen::VectorXd left = integrator.integrate(panel.a, mid);
    Eigen::VectorXd right = integrator.integrate(mid, panel.b);
    const double err = (left + right - panel.coarse).cwiseAbs().maxCoeff();
    const double allowed = budget * (panel.b - panel.a) / length;
    if (err <= allowed) {
      integral += left + right;
      error += err;
      continue;
    }
    panels += 2;
    if (panels > options.max_panels || (panel.b - panel.a) < 1e-13 * length) {
      std::ostringstream os;
      os << "Gil-Pelaez quadrature did not converge: panel [" << panel.a << ", " << panel.b
         << "] error " << err / std::numbers::pi << " exceeds its share of quad_tol " << tol;
      throw AccuracyError(os.str(), err / std::numbers::pi);
    }
    stack.push_back({ mid, panel.b, std::move(right) });
    stack.push_back({ panel.a, mid, std::move(left) });
  }
  table.error_estimate = error / std::numbers::pi + 0.5 * tol;

  Eigen::VectorXd raw = 0.5 - integral.array() / std::numbers::pi;
  const double slack = 10.0 * tol;
  if (raw.minCoeff() < -slack || raw.maxCoeff() > 1.0 + slack) {
    std::ostringstream os;
    os << "inverted CDF leaves [0, 1] beyond 10 * quad_tol (range [" << raw.minCoeff() << ", "
       << raw.maxCoeff() << "])";
    const double excess = std::max(-raw.minCoeff(), raw.maxCoeff() - 1.0);
    throw AccuracyError(os.str(), excess);
  }
  table.values = raw.cwiseMax(0.0).cwiseMin(1.0);
  for (int p = 1; p < np; ++p) {
    const double drop = table.values(p - 1) - table.values(p);
    if (drop > tol) {
      std::ostringstream os;
      os << "inverted CDF decreases by " << drop << " at x = " << table.grid(p)
         << " (beyond quad_tol " << tol << ")";
      throw AccuracyError(os.str(), drop);
    }
  }
  return table;
}

CdfTable
invert(const ProjectedEcf& ecf, const InversionOptions& options)
{
  if (!(ecf.sigma2 > 0.0))
    throw DegenerateSmoothingError(
      "inversion requires a positive smoothing variance (sigma2 = 0 is unsupported)");
  SmoothedEcfFunction cf(ecf);
  return invert(cf, ecf.min(), ecf.max(), options);
}

} // namespace ecfcc
