#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace ecfcc {

/// Discrete-time LTI system x[k+1] = A x[k] + B u[k] + G w[k] over a
/// finite horizon, with box bounds on each input.
struct LtiSystem
{
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd G;
  int horizon = 1;
  Eigen::VectorXd u_min;
  Eigen::VectorXd u_max;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int p() const { return static_cast<int>(G.cols()); }

  /// Throws DimensionError / ConfigError on inconsistent data.
  void validate() const;
};

/// Stacked matrices with xbar = Abar x0 + Bbar ubar + Gbar wbar, where
/// xbar = [x[0]; ...; x[N]], ubar = [u[0]; ...; u[N-1]] and likewise wbar.
struct ConcatenatedSystem
{
  Eigen::MatrixXd Abar;
  Eigen::MatrixXd Bbar;
  Eigen::MatrixXd Gbar;
  int n = 0;
  int m = 0;
  int p = 0;
  int horizon = 0;

  int state_dim() const { return n * (horizon + 1); }
  int input_dim() const { return m * horizon; }
  int disturbance_dim() const { return p * horizon; }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x0,
                           const Eigen::VectorXd& u_bar,
                           const Eigen::VectorXd& w_bar) const;
};

ConcatenatedSystem concatenate(const LtiSystem& sys);

/// Step-by-step simulation; returns the concatenated trajectory.
Eigen::VectorXd simulate(const LtiSystem& sys,
                         const Eigen::VectorXd& x0,
                         const Eigen::VectorXd& u_bar,
                         const Eigen::VectorXd& w_bar);

/// One row p^T xbar <= q of the polytope P xbar <= q.
struct Halfspace
{
  Eigen::VectorXd normal;
  double offset = 0.0;
};

struct PolytopeConstraints
{
  std::vector<Halfspace> rows;

  int size() const { return static_cast<int>(rows.size()); }
  Eigen::MatrixXd P() const;
  Eigen::VectorXd q() const;
  bool contains(const Eigen::VectorXd& x_bar, double tol = 0.0) const;
  void append(const PolytopeConstraints& other);
  void validate(int state_dim) const;
};

/// Bound slope * t + intercept with t = k * dt.
struct AffineBound
{
  double slope = 0.0;
  double intercept = 0.0;

  double at(double t) const { return slope * t + intercept; }
};

/// Time-varying bound on a single state coordinate,
/// lower(t) <= x_coord[k] <= upper(t).
struct StateBoundSpec
{
  int coordinate = 0;
  std::optional<AffineBound> lower;
  std::optional<AffineBound> upper;
  double dt = 1.0;
  /// Constrained steps default to k in [1, N]; the initial state is
  /// deterministic so k = 0 is opt-in.
  bool include_initial = false;
  std::optional<int> first_step;
  std::optional<int> last_step;
};

/// Emits, per constrained step, the lower row (if any) followed by the
/// upper row (if any).
PolytopeConstraints build_time_varying_halfspaces(const StateBoundSpec& spec,
                                                  const LtiSystem& sys);

} // namespace ecfcc
