#include "ecfcc/lti.hpp"

#include "ecfcc/error.hpp"

#include <string>

namespace ecfcc {

void
LtiSystem::validate() const
{
  if (horizon < 1)
    throw ConfigError("horizon must be >= 1, got " + std::to_string(horizon));
  if (A.rows() == 0 || A.rows() != A.cols())
    throw DimensionError("A must be a non-empty square matrix");
  if (B.rows() != A.rows())
    throw DimensionError("B must have as many rows as A");
  if (G.rows() != A.rows())
    throw DimensionError("G must have as many rows as A");
  if (u_min.size() != B.cols() || u_max.size() != B.cols())
    throw DimensionError("input bounds must have one entry per input");
  for (Eigen::Index i = 0; i < u_min.size(); ++i) {
    if (!(u_min(i) <= u_max(i)))
      throw ConfigError("u_min must not exceed u_max (input " + std::to_string(i) + ")");
  }
}

ConcatenatedSystem
concatenate(const LtiSystem& sys)
{
  sys.validate();
  const int n = sys.n(), m = sys.m(), p = sys.p(), N = sys.horizon;

  ConcatenatedSystem out;
  out.n = n;
  out.m = m;
  out.p = p;
  out.horizon = N;
  out.Abar = Eigen::MatrixXd::Zero(n * (N + 1), n);
  out.Bbar = Eigen::MatrixXd::Zero(n * (N + 1), m * N);
  out.Gbar = Eigen::MatrixXd::Zero(n * (N + 1), p * N);

  // powers[d] = A^d
  std::vector<Eigen::MatrixXd> powers(N + 1);
  powers[0] = Eigen::MatrixXd::Identity(n, n);
  for (int d = 1; d <= N; ++d)
    powers[d] = sys.A * powers[d - 1];

  for (int k = 0; k <= N; ++k) {
    out.Abar.block(k * n, 0, n, n) = powers[k];
    for (int j = 0; j < k; ++j) {
      out.Bbar.block(k * n, j * m, n, m) = powers[k - 1 - j] * sys.B;
      out.Gbar.block(k * n, j * p, n, p) = powers[k - 1 - j] * sys.G;
    }
  }
  return out;
}

Eigen::VectorXd
ConcatenatedSystem::evaluate(const Eigen::VectorXd& x0,
                             const Eigen::VectorXd& u_bar,
                             const Eigen::VectorXd& w_bar) const
{
  if (x0.size() != n || u_bar.size() != input_dim() || w_bar.size() != disturbance_dim())
    throw DimensionError("concatenated evaluation: argument sizes do not match the system");
  return Abar * x0 + Bbar * u_bar + Gbar * w_bar;
}

Eigen::VectorXd
simulate(const LtiSystem& sys,
         const Eigen::VectorXd& x0,
         const Eigen::VectorXd& u_bar,
         const Eigen::VectorXd& w_bar)
{
  sys.validate();
  const int n = sys.n(), m = sys.m(), p = sys.p(), N = sys.horizon;
  if (x0.size() != n || u_bar.size() != m * N || w_bar.size() != p * N)
    throw DimensionError("simulate: argument sizes do not match the system");

  Eigen::VectorXd traj(n * (N + 1));
  Eigen::VectorXd x = x0;
  traj.head(n) = x;
  for (int k = 0; k < N; ++k) {
    x = sys.A * x + sys.B * u_bar.segment(k * m, m) + sys.G * w_bar.segment(k * p, p);
    traj.segment((k + 1) * n, n) = x;
  }
  return traj;
}

Eigen::MatrixXd
PolytopeConstraints::P() const
{
  if (rows.empty())
    return {};
  Eigen::MatrixXd out(rows.size(), rows.front().normal.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = rows[i].normal.transpose();
  return out;
}

Eigen::VectorXd
PolytopeConstraints::q() const
{
  Eigen::VectorXd out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = rows[i].offset;
  return out;
}

bool
PolytopeConstraints::contains(const Eigen::VectorXd& x_bar, double tol) const
{
  for (const auto& row : rows) {
    if (row.normal.dot(x_bar) > row.offset + tol)
      return false;
  }
  return true;
}

void
PolytopeConstraints::append(const PolytopeConstraints& other)
{
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

void
PolytopeConstraints::validate(int state_dim) const
{
  if (rows.empty())
    throw ConfigError("constraint set must contain at least one row");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].normal.size() != state_dim)
      throw DimensionError("constraint row " + std::to_string(i) + " has length " +
                           std::to_string(rows[i].normal.size()) + ", expected " +
                           std::to_string(state_dim));
    if (rows[i].normal.isZero(0.0))
      throw ConfigError("constraint row " + std::to_string(i) + " has a zero normal");
  }
}

PolytopeConstraints
build_time_varying_halfspaces(const StateBoundSpec& spec, const LtiSystem& sys)
{
  const int n = sys.n(), N = sys.horizon;
  if (spec.coordinate < 0 || spec.coordinate >= n)
    throw DimensionError("state coordinate " + std::to_string(spec.coordinate) +
                         " out of range [0, " + std::to_string(n) + ")");
  if (!spec.lower && !spec.upper)
    throw ConfigError("state bound needs a lower or an upper bound");

  const int first = spec.first_step.value_or(spec.include_initial ? 0 : 1);
  const int last = spec.last_step.value_or(N);
  if (first < 0 || last > N || first > last)
    throw ConfigError("constrained steps [" + std::to_string(first) + ", " +
                      std::to_string(last) + "] outside [0, " + std::to_string(N) + "]");

  const int dim = n * (N + 1);
  PolytopeConstraints out;
  for (int k = first; k <= last; ++k) {
    const double t = k * spec.dt;
    const int index = k * n + spec.coordinate;
    if (spec.lower) {
      Halfspace h{ Eigen::VectorXd::Zero(dim), -spec.lower->at(t) };
      h.normal(index) = -1.0;
      out.rows.push_back(std::move(h));
    }
    if (spec.upper) {
      Halfspace h{ Eigen::VectorXd::Zero(dim), spec.upper->at(t) };
      h.normal(index) = 1.0;
      out.rows.push_back(std::move(h));
    }
  }
  return out;
}

} // namespace ecfcc
