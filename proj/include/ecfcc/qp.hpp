#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>

namespace ecfcc {

/// min 1/2 z^T H z + f^T z  s.t.  A z <= b
struct QpProblem
{
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  int num_vars() const { return static_cast<int>(f.size()); }
  int num_constraints() const { return static_cast<int>(b.size()); }
  double objective(const Eigen::VectorXd& z) const { return 0.5 * z.dot(H * z) + f.dot(z); }
  /// Throws DimensionError / ConfigError (H not symmetric PSD).
  void validate() const;
};

struct KktResiduals
{
  double primal_inf = 0.0; ///< max (A z - b)_+
  double dual_inf = 0.0;   ///< || H z + f + A^T lambda ||_inf
  double comp_slack = 0.0; ///< max |lambda_i (A z - b)_i|
  double lambda_min = 0.0;

  bool within(double tol) const
  {
    return primal_inf <= tol && dual_inf <= tol && comp_slack <= tol && lambda_min >= -tol;
  }
};

/// Recomputes residuals directly from the problem data.
KktResiduals kkt_residuals(const QpProblem& qp, const Eigen::VectorXd& z, const Eigen::VectorXd& lambda);

enum class QpStatus
{
  optimal,
  infeasible,
  max_iterations,
};

const char* to_string(QpStatus status);

struct QpSettings
{
  double tol = 1e-8;
  int max_iter = 100;
  std::optional<Eigen::VectorXd> initial;
};

struct QpResult
{
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;
  double objective = 0.0;
  QpStatus status = QpStatus::max_iterations;
  KktResiduals kkt;
  int iterations = 0;
  /// Farkas multipliers y >= 0 with A^T y = 0, b^T y < 0 when infeasible.
  Eigen::VectorXd certificate;
  std::string diagnostic;
};

/// Primal-dual interior point (Mehrotra predictor-corrector) on the
/// inequality form, with an active-set polish once the barrier is small.
/// When the iteration fails, a phase-one problem minimising the largest
/// constraint violation decides between infeasible and max_iterations.
QpResult solve_qp(const QpProblem& qp, const QpSettings& settings = {});

} // namespace ecfcc
